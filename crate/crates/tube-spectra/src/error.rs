use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Geometry became singular (Jacobian not uniformly positive, frame drift, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// The request is outside what this build supports (cross-section shape, dimension cap).
    #[error("capability error: {0}")]
    Capability(String),

    /// Operator assembly rejected its inputs (grid mismatch, missing field).
    #[error("assembly error: {0}")]
    Assembly(String),

    /// Input data are degenerate (empty lists, non-monotone samples, zero vectors).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An eigenfunction violates the oscillation count it must have.
    #[error("mode {index}: expected {expected} interior zeros, found {found}")]
    SturmViolation {
        index: usize,
        expected: usize,
        found: usize,
    },

    /// Computed and reference mode overlap too weakly to identify them.
    #[error("mode {index}: pairing ambiguous, |overlap| = {overlap:.3e} < 0.5")]
    PairingAmbiguity { index: usize, overlap: f64 },

    /// Rate fitting had too little usable data.
    #[error("rate fit: {0}")]
    RateFit(String),

    /// The iterative eigensolver did not reach its tolerance.
    #[error("eigensolver: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
