//! Numerical laboratory for the Dirichlet Laplacian on thin curved tubes.
//!
//! A tube of width scale eps around a curve, straightened into coordinates
//! (s, t) on (0, L) x omega, carries the operator
//!
//! ```text
//! T = -d/ds a_eps d/ds + eps^{-2} (-Lap_t - E_1) + V(s, t)
//! ```
//!
//! whose low eigenvalues converge, as eps -> 0, to those of the 1D
//! Schroedinger operator S = -d^2/ds^2 - kappa_1(s)^2 / 4 with Dirichlet ends.
//! The crate assembles these operators on tensor grids, solves for the lowest
//! eigenpairs, and measures the convergence rates, eigenfunction errors, and
//! nodal-set displacement that the limit predicts, for curved planar and
//! spatial tubes and for thin strips around geodesics of curved surfaces.

pub mod analysis;
pub mod banded;
pub mod config;
pub mod cross_section;
pub mod eigensolve;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod operators;
pub mod pipeline;
pub mod profile;
pub mod report;
pub mod surface;

pub use error::{Error, Result};
