//! Cross-sections omega in R^{d-1} with analytic Dirichlet eigenpairs.
//!
//! Supported shapes are symmetric intervals and hyperrectangles, where the
//! Dirichlet spectrum is a lattice of sine modes. Both the analytic values
//! E_n and the eigenvalues of the discrete second-order stencil on a given
//! grid are available in closed form; the discrete ones are what the
//! operator assembly subtracts, so the transverse part of a straight tube
//! cancels exactly instead of leaving an O(dt^2)/eps^2 bias.

use crate::error::{Error, Result};
use crate::grid::TensorGrid;

#[derive(Debug, Clone, PartialEq)]
pub enum CrossSection {
    /// (-half_width, half_width)
    Interval { half_width: f64 },
    /// Product of (-sides[mu]/2, sides[mu]/2)
    Rectangle { sides: Vec<f64> },
}

impl CrossSection {
    pub fn interval(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Domain(format!(
                "interval half-width must be positive, got {half_width}"
            )));
        }
        Ok(CrossSection::Interval { half_width })
    }

    pub fn rectangle(sides: Vec<f64>) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::Domain("rectangle needs at least one side".into()));
        }
        if sides.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(Error::Domain(format!("rectangle sides must be positive, got {sides:?}")));
        }
        Ok(CrossSection::Rectangle { sides })
    }

    /// Number of transverse directions (d - 1).
    pub fn dim_t(&self) -> usize {
        match self {
            CrossSection::Interval { .. } => 1,
            CrossSection::Rectangle { sides } => sides.len(),
        }
    }

    pub fn half_extents(&self) -> Vec<f64> {
        match self {
            CrossSection::Interval { half_width } => vec![*half_width],
            CrossSection::Rectangle { sides } => sides.iter().map(|b| b / 2.0).collect(),
        }
    }

    /// a = sup_{t in omega} |t|. Half the diagonal for rectangles.
    pub fn radius(&self) -> f64 {
        self.half_extents().iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    /// Distance to the boundary; positive inside omega.
    pub fn dist_boundary(&self, t: &[f64]) -> f64 {
        let halves = self.half_extents();
        debug_assert_eq!(t.len(), halves.len());
        t.iter()
            .zip(&halves)
            .map(|(&ti, &h)| h - ti.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Analytic Dirichlet eigenpair of omega: the n-th value (with multiplicity)
/// and a closed-form, L^2-normalized eigenfunction.
#[derive(Debug, Clone)]
pub struct TransverseEigenpair {
    /// 1-based position in the ordered spectrum.
    pub index: usize,
    pub value: f64,
    /// Per-direction mode numbers (all 1 for the ground mode).
    pub modes: Vec<usize>,
    halves: Vec<f64>,
}

impl TransverseEigenpair {
    pub fn eval(&self, t: &[f64]) -> f64 {
        debug_assert_eq!(t.len(), self.halves.len());
        let mut v = 1.0;
        for ((&ti, &h), &k) in t.iter().zip(&self.halves).zip(&self.modes) {
            let b = 2.0 * h;
            v *= (1.0 / h).sqrt() * (k as f64 * std::f64::consts::PI * (ti + h) / b).sin();
        }
        v
    }
}

/// n-th Dirichlet eigenpair of omega, counted with multiplicity; ties are
/// ordered by the mode tuple so the choice is deterministic.
pub fn transverse_eigenpair(omega: &CrossSection, n: usize) -> Result<TransverseEigenpair> {
    if n == 0 {
        return Err(Error::Domain("mode index n is 1-based".into()));
    }
    let halves = omega.half_extents();
    let value_of = |modes: &[usize]| -> f64 {
        modes
            .iter()
            .zip(&halves)
            .map(|(&k, &h)| {
                let q = k as f64 * std::f64::consts::PI / (2.0 * h);
                q * q
            })
            .sum()
    };
    let dims = halves.len();
    // every index of the n-th smallest mode is at most n, so n+1 per axis is safe
    let cap = n + 1;
    let mut tuples: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..dims {
        tuples = tuples
            .into_iter()
            .flat_map(|prefix| {
                (1..=cap).map(move |k| {
                    let mut t = prefix.clone();
                    t.push(k);
                    t
                })
            })
            .collect();
    }
    let mut scored: Vec<(f64, Vec<usize>)> =
        tuples.into_iter().map(|t| (value_of(&t), t)).collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)));
    let (value, modes) = scored[n - 1].clone();
    Ok(TransverseEigenpair {
        index: n,
        value,
        modes,
        halves,
    })
}

pub fn e1_analytic(omega: &CrossSection) -> f64 {
    transverse_eigenpair(omega, 1).expect("ground mode exists").value
}

/// Integral of the eigenfunction squared over omega, by per-axis Romberg
/// quadrature. Should be 1 up to quadrature accuracy.
pub fn norm_quadrature(pair: &TransverseEigenpair) -> f64 {
    let mut prod = 1.0;
    for (&h, &k) in pair.halves.iter().zip(&pair.modes) {
        let b = 2.0 * h;
        let f = move |x: f64| {
            let v = (1.0 / h).sqrt() * (k as f64 * std::f64::consts::PI * (x + h) / b).sin();
            v * v
        };
        prod *= romberg(f, -h, h, 1e-13);
    }
    prod
}

/// min over a fine grid of J_1 / dist(t, boundary); positive for the ground mode.
pub fn ground_amplitude_ratio(omega: &CrossSection) -> Result<f64> {
    let pair = transverse_eigenpair(omega, 1)?;
    let halves = omega.half_extents();
    let per_dim = 201usize;
    let dims = halves.len();
    let total: usize = per_dim.pow(dims as u32);
    let mut min_ratio = f64::INFINITY;
    let mut t = vec![0.0; dims];
    for flat in 0..total {
        let mut rest = flat;
        for mu in (0..dims).rev() {
            let j = rest % per_dim;
            rest /= per_dim;
            t[mu] = -halves[mu] + (j as f64 + 1.0) * 2.0 * halves[mu] / (per_dim as f64 + 1.0);
        }
        let dist = omega.dist_boundary(&t);
        min_ratio = min_ratio.min(pair.eval(&t) / dist);
    }
    Ok(min_ratio)
}

/// Eigenvalue of the discrete Dirichlet stencil for one axis: m interior
/// nodes, spacing dt, mode number k.
pub fn stencil_eigenvalue_1d(m: usize, dt: f64, k: usize) -> f64 {
    let theta = k as f64 * std::f64::consts::PI / (m as f64 + 1.0);
    2.0 / (dt * dt) * (1.0 - theta.cos())
}

/// Eigenvalue of the discrete transverse Laplacian on the grid for the mode
/// tuple `ks` (sum across axes; eigenvectors are exact sine samples).
pub fn discrete_transverse_value(grid: &TensorGrid, ks: &[usize]) -> f64 {
    grid.t_dims
        .iter()
        .zip(ks)
        .map(|(d, &k)| stencil_eigenvalue_1d(d.m, d.dt, k))
        .sum()
}

/// Smallest eigenvalue of the discrete transverse stencil: the quantity the
/// assembly subtracts so the decoupled ground channel sits exactly at zero.
pub fn e1_discrete(grid: &TensorGrid) -> f64 {
    discrete_transverse_value(grid, &vec![1; grid.t_dims.len()])
}

/// All eigenvalues of the discrete transverse stencil, ascending. Exhaustive;
/// intended for small verification grids.
pub fn discrete_transverse_spectrum(grid: &TensorGrid) -> Vec<f64> {
    let mut values = vec![0.0f64];
    for d in &grid.t_dims {
        let axis: Vec<f64> = (1..=d.m).map(|k| stencil_eigenvalue_1d(d.m, d.dt, k)).collect();
        values = values
            .iter()
            .flat_map(|&v| axis.iter().map(move |&a| v + a))
            .collect();
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values
}

/// Ground eigenvector of the discrete transverse stencil, normalized in the
/// discrete L^2 of the grid. For tensor stencils this equals the sampled
/// analytic mode up to normalization.
pub fn j1_discrete(omega: &CrossSection, grid: &TensorGrid) -> Result<Vec<f64>> {
    if omega.dim_t() != grid.t_dims.len() {
        return Err(Error::Assembly(format!(
            "cross-section has {} transverse directions but the grid has {}",
            omega.dim_t(),
            grid.t_dims.len()
        )));
    }
    let pair = transverse_eigenpair(omega, 1)?;
    let nt = grid.transverse_len();
    let mut j = Vec::with_capacity(nt);
    for flat in 0..nt {
        j.push(pair.eval(&grid.t_coords(flat)));
    }
    let w = grid.transverse_cell_volume();
    let norm = (j.iter().map(|v| v * v).sum::<f64>() * w).sqrt();
    if norm == 0.0 {
        return Err(Error::Degenerate("ground transverse mode sampled to zero".into()));
    }
    for v in &mut j {
        *v /= norm;
    }
    Ok(j)
}

/// Discrete Rayleigh quotient |grad psi|^2 / |psi|^2 of the transverse stencil
/// on a function sampled at the grid's transverse nodes (implicit zero
/// boundary). Bounded below by `e1_discrete` exactly.
pub fn poincare_ratio(grid: &TensorGrid, psi: &[f64]) -> Result<f64> {
    let nt = grid.transverse_len();
    if psi.len() != nt {
        return Err(Error::Domain(format!(
            "expected {nt} transverse samples, got {}",
            psi.len()
        )));
    }
    let norm2: f64 = psi.iter().map(|v| v * v).sum();
    if norm2 == 0.0 {
        return Err(Error::Degenerate("zero function has no Rayleigh quotient".into()));
    }
    let dims = grid.t_dims.len();
    let mut form = 0.0;
    for mu in 0..dims {
        let m = grid.t_dims[mu].m;
        let dt2 = grid.t_dims[mu].dt * grid.t_dims[mu].dt;
        let stride: usize = grid.t_dims[mu + 1..].iter().map(|d| d.m).product();
        for start in 0..nt {
            if (start / stride) % m != 0 {
                continue;
            }
            // walk one lattice line along axis mu, adding boundary terms
            let first = psi[start];
            let last = psi[start + (m - 1) * stride];
            let mut line = first * first + last * last;
            for j in 0..m - 1 {
                let a = psi[start + j * stride];
                let b = psi[start + (j + 1) * stride];
                line += (b - a) * (b - a);
            }
            form += line / dt2;
        }
    }
    Ok(form / norm2)
}

fn romberg(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const MAX_LEVELS: usize = 20;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(MAX_LEVELS);
    let mut h = b - a;
    let mut trapezoid = 0.5 * h * (f(a) + f(b));
    rows.push(vec![trapezoid]);
    for level in 1..MAX_LEVELS {
        h *= 0.5;
        let points = 1usize << (level - 1);
        let mut sum = 0.0;
        for i in 0..points {
            sum += f(a + (2 * i + 1) as f64 * h);
        }
        trapezoid = 0.5 * rows[level - 1][0] + h * sum;
        let mut row = vec![trapezoid];
        let mut factor = 1.0;
        for k in 1..=level {
            factor *= 4.0;
            let extrap = (factor * row[k - 1] - rows[level - 1][k - 1]) / (factor - 1.0);
            row.push(extrap);
        }
        let err = (row[level] - rows[level - 1][level - 1]).abs();
        rows.push(row);
        if level > 3 && err < tol {
            break;
        }
    }
    *rows.last().unwrap().last().unwrap()
}
