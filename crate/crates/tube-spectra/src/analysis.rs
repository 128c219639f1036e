//! Spectral and nodal diagnostics: nodal sets of the 1D comparison modes,
//! Sturm oscillation checks, eigenvalue gaps between the tube operator and
//! its 1D limit, weighted eigenfunction errors, sign/nodal localization,
//! unitary reconstruction on the image tube, eigenvalue bracketing, and the
//! eps-sweep that fits empirical convergence rates.
//!
//! Everything here consumes converged `EigenResult`s; nothing re-solves.
//! The sweep is the one orchestrator: it assembles and solves per eps (rows
//! in parallel, output order fixed by the input eps order), measures every
//! per-mode metric, and fits log-log slopes when at least three usable
//! points exist.

use rayon::prelude::*;

use crate::cross_section::{self, CrossSection};
use crate::eigensolve::{EigenResult, EigenSolver};
use crate::error::{Error, Result};
use crate::geometry::{
    check_immersion, jacobian_field, tang_frame_for_grid, CurveSpec, JacobianField, RotationPath,
};
use crate::grid::TensorGrid;
use crate::operators::{self, DiscreteOperator, PotentialField};

/// Nodal structure of a 1D Dirichlet mode: the n-th mode has exactly n - 1
/// interior zeros, listed ascending, with the endpoints 0 and L adjoined in
/// `all` so consecutive entries bound the sign-constant subintervals.
#[derive(Debug, Clone)]
pub struct NodalData1D {
    /// 1-based mode index n.
    pub index: usize,
    /// Interior zeros, strictly increasing.
    pub interior: Vec<f64>,
    /// 0, interior zeros, L.
    pub all: Vec<f64>,
    /// Smallest subinterval length.
    pub min_gap: f64,
}

impl NodalData1D {
    /// Distance from s to the interior zero set; infinite when the ground
    /// mode has none.
    pub fn dist_interior(&self, s: f64) -> f64 {
        self.interior
            .iter()
            .map(|z| (s - z).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Sign the mode carries at s under the first-lobe-positive convention:
    /// +1 on the first subinterval, alternating across each interior zero.
    pub fn sign_at(&self, s: f64) -> f64 {
        let crossed = self.interior.iter().filter(|&&z| z < s).count();
        if crossed % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Locates the interior zeros of a 1D grid function by sign change with
/// linear interpolation; an exact zero at a node counts as a crossing at the
/// node coordinate. Errors unless exactly n - 1 zeros are found, which is
/// what oscillation theory demands of the n-th Dirichlet mode and what
/// under-resolution or clustering breaks first.
pub fn nodal_points_1d(phi: &[f64], length: f64, n: usize) -> Result<NodalData1D> {
    if n == 0 {
        return Err(Error::Domain("mode index is 1-based".into()));
    }
    if phi.len() < 2 {
        return Err(Error::Degenerate(format!("{} samples cannot carry a mode", phi.len())));
    }
    let m = phi.len();
    let ds = length / (m + 1) as f64;
    let s_of = |i: usize| (i + 1) as f64 * ds;
    let mut zeros: Vec<f64> = Vec::new();
    for (i, &p) in phi.iter().enumerate() {
        if p == 0.0 {
            zeros.push(s_of(i));
        }
    }
    for i in 0..m - 1 {
        if phi[i] != 0.0 && phi[i + 1] != 0.0 && phi[i] * phi[i + 1] < 0.0 {
            let w = phi[i] / (phi[i] - phi[i + 1]);
            zeros.push(s_of(i) + w * ds);
        }
    }
    zeros.sort_by(f64::total_cmp);
    if zeros.len() != n - 1 {
        return Err(Error::SturmViolation {
            index: n,
            expected: n - 1,
            found: zeros.len(),
        });
    }
    let mut all = Vec::with_capacity(n + 1);
    all.push(0.0);
    all.extend_from_slice(&zeros);
    all.push(length);
    let min_gap = all
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    Ok(NodalData1D {
        index: n,
        interior: zeros,
        all,
        min_gap,
    })
}

/// Oscillation-theory report for the lowest modes of the 1D operator.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    /// The bound used for |mu_n - (n pi / L)^2|, normally |v0|_inf.
    pub c_bound: f64,
    /// Worst excess of that bracket over c_bound (should sit within the
    /// discretization tolerance).
    pub bracket_excess: f64,
    /// Smallest gap mu_{n+1} - mu_n.
    pub min_value_gap: f64,
    /// Smallest nodal subinterval over all modes.
    pub min_zero_spacing: f64,
    /// Measured inf over nodes of |phi_n(s)| / dist(s, subinterval ends);
    /// positive iff the modes grow linearly off their nodal set.
    pub min_growth_ratio: f64,
    pub pass: bool,
}

/// Checks the ordered-bracket, simplicity, spacing and linear-growth
/// properties of the lowest 1D modes. `tol` absorbs the discretization
/// error in the eigenvalue bracket.
pub fn verify_sturm_properties(
    s_result: &EigenResult,
    length: f64,
    c_bound: f64,
    tol: f64,
) -> Result<PropertyReport> {
    let n_modes = s_result.values.len();
    if n_modes == 0 {
        return Err(Error::Degenerate("no eigenpairs to verify".into()));
    }
    let mut bracket_excess = f64::NEG_INFINITY;
    for (k, &mu) in s_result.values.iter().enumerate() {
        let n = (k + 1) as f64;
        let free = (n * std::f64::consts::PI / length).powi(2);
        bracket_excess = bracket_excess.max((mu - free).abs() - c_bound);
    }
    let min_value_gap = s_result
        .values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let mut min_zero_spacing = f64::INFINITY;
    let mut min_growth_ratio = f64::INFINITY;
    let m = s_result.vectors[0].len();
    let ds = length / (m + 1) as f64;
    for (k, phi) in s_result.vectors.iter().enumerate() {
        let nodal = nodal_points_1d(phi, length, k + 1)?;
        min_zero_spacing = min_zero_spacing.min(nodal.min_gap);
        for (i, &p) in phi.iter().enumerate() {
            let s = (i + 1) as f64 * ds;
            let d = nodal
                .all
                .iter()
                .map(|z| (s - z).abs())
                .fold(f64::INFINITY, f64::min);
            if d > 0.0 {
                min_growth_ratio = min_growth_ratio.min(p.abs() / d);
            }
        }
    }
    let pass = bracket_excess <= tol && min_value_gap > 0.0 && min_zero_spacing > 0.0 && min_growth_ratio > 0.0;
    Ok(PropertyReport {
        c_bound,
        bracket_excess,
        min_value_gap,
        min_zero_spacing,
        min_growth_ratio,
        pass,
    })
}

/// Tensor references phi_n (x) J1: the decoupled modes the tube modes are
/// compared against. Both factors carry unit discrete norm in their own
/// cell volumes, so the product does too.
pub fn reference_modes(s_modes: &[Vec<f64>], j1: &[f64]) -> Vec<Vec<f64>> {
    s_modes
        .iter()
        .map(|phi| {
            let mut v = Vec::with_capacity(phi.len() * j1.len());
            for &p in phi {
                for &j in j1 {
                    v.push(p * j);
                }
            }
            v
        })
        .collect()
}

/// One tube mode aligned against its reference: flips the computed vector's
/// sign so the discrete overlap is positive. An overlap below 0.5 means the
/// mode cannot be identified with the reference (eps outside the asymptotic
/// regime, or a cluster) and is an error.
pub fn align_mode(psi: &[f64], reference: &[f64], cell_volume: f64, index: usize) -> Result<(Vec<f64>, f64)> {
    let overlap: f64 = psi.iter().zip(reference).map(|(a, b)| a * b).sum::<f64>() * cell_volume;
    if overlap.abs() < 0.5 {
        return Err(Error::PairingAmbiguity { index, overlap });
    }
    let mut out = psi.to_vec();
    if overlap < 0.0 {
        for x in out.iter_mut() {
            *x = -*x;
        }
    }
    Ok((out, overlap.abs()))
}

#[derive(Debug, Clone)]
pub struct PairedModes {
    pub psi: Vec<Vec<f64>>,
    pub psi0: Vec<Vec<f64>>,
    pub overlaps: Vec<f64>,
}

/// Index-matched alignment of a solved mode set against references.
pub fn pair_and_sign(result: &EigenResult, refs: &[Vec<f64>], cell_volume: f64) -> Result<PairedModes> {
    if result.vectors.len() != refs.len() {
        return Err(Error::Domain(format!(
            "{} computed modes vs {} references",
            result.vectors.len(),
            refs.len()
        )));
    }
    let mut psi = Vec::with_capacity(refs.len());
    let mut overlaps = Vec::with_capacity(refs.len());
    for (i, (v, r)) in result.vectors.iter().zip(refs).enumerate() {
        let (aligned, o) = align_mode(v, r, cell_volume, i + 1)?;
        psi.push(aligned);
        overlaps.push(o);
    }
    Ok(PairedModes {
        psi,
        psi0: refs.to_vec(),
        overlaps,
    })
}

/// Plain and boundary-weighted sup errors between a mode and its reference:
/// sup |psi - psi0| and sup |psi - psi0| / dist(t, boundary of omega).
pub fn eigenfunction_errors(
    psi: &[f64],
    psi0: &[f64],
    omega: &CrossSection,
    grid: &TensorGrid,
) -> (f64, f64) {
    let nt = grid.transverse_len();
    let dist: Vec<f64> = (0..nt)
        .map(|f| omega.dist_boundary(&grid.t_coords(f)))
        .collect();
    let mut sup = 0.0f64;
    let mut weighted = 0.0f64;
    for (idx, (&a, &b)) in psi.iter().zip(psi0).enumerate() {
        let e = (a - b).abs();
        sup = sup.max(e);
        weighted = weighted.max(e / dist[idx % nt]);
    }
    (sup, weighted)
}

#[derive(Debug, Clone)]
pub struct ViolationReport {
    /// Nodes farther than `margin` from the nodal set whose sign disagrees.
    pub violations: usize,
    /// Nodes that were tested (distance > margin).
    pub tested: usize,
    /// Largest distance-to-nodal-set among ALL sign-disagreeing nodes: the
    /// smallest margin that would give zero violations.
    pub empirical_margin: f64,
}

/// Compares sgn psi(s,t) against the sign the 1D mode carries at s, away
/// from the nodal set.
pub fn sign_agreement(psi: &[f64], nodal: &NodalData1D, margin: f64, grid: &TensorGrid) -> ViolationReport {
    let nt = grid.transverse_len();
    let mut violations = 0usize;
    let mut tested = 0usize;
    let mut empirical = 0.0f64;
    for i_s in 0..grid.m_s {
        let s = grid.s_node(i_s);
        let d = nodal.dist_interior(s);
        let expected = nodal.sign_at(s);
        for f in 0..nt {
            let x = psi[i_s * nt + f];
            let agrees = x * expected > 0.0;
            if !agrees && d.is_finite() {
                empirical = empirical.max(d);
            }
            if d > margin {
                tested += 1;
                if !agrees {
                    violations += 1;
                }
            }
        }
    }
    ViolationReport {
        violations,
        tested,
        empirical_margin: empirical,
    }
}

#[derive(Debug, Clone)]
pub struct NodalDisplacement {
    /// Max over zero crossings (on lines with the expected count) of the
    /// distance to the 1D nodal set. 0 when there is nothing to cross.
    pub max_displacement: f64,
    /// Crossings found per transverse line, in line order.
    pub per_line_counts: Vec<usize>,
    /// Lines whose crossing count differs from n - 1.
    pub flagged_lines: usize,
}

/// Zero crossings of psi along s, per transverse line (in flat transverse
/// order): sign changes located by linear interpolation, exact zeros taken
/// as-is.
pub fn line_crossings(psi: &[f64], grid: &TensorGrid) -> Vec<Vec<f64>> {
    let nt = grid.transverse_len();
    let mut lines = Vec::with_capacity(nt);
    for f in 0..nt {
        let mut crossings: Vec<f64> = Vec::new();
        for i_s in 0..grid.m_s {
            let x = psi[i_s * nt + f];
            if x == 0.0 {
                crossings.push(grid.s_node(i_s));
            } else if i_s + 1 < grid.m_s {
                let y = psi[(i_s + 1) * nt + f];
                if y != 0.0 && x * y < 0.0 {
                    let w = x / (x - y);
                    crossings.push(grid.s_node(i_s) + w * grid.ds);
                }
            }
        }
        lines.push(crossings);
    }
    lines
}

/// Walks every transverse line along s, interpolates the zero crossings of
/// psi, and measures how far they sit from the 1D nodal set. Lines with an
/// unexpected crossing count are flagged and excluded from the max, not
/// fatal: they indicate grid-scale sign noise near the nodal surface.
pub fn nodal_displacement(psi: &[f64], nodal: &NodalData1D, grid: &TensorGrid) -> NodalDisplacement {
    let expected = nodal.interior.len();
    let mut per_line_counts = Vec::new();
    let mut flagged = 0usize;
    let mut worst = 0.0f64;
    for crossings in line_crossings(psi, grid) {
        per_line_counts.push(crossings.len());
        if crossings.len() != expected {
            flagged += 1;
            continue;
        }
        for c in crossings {
            worst = worst.max(nodal.dist_interior(c));
        }
    }
    if expected == 0 {
        worst = 0.0;
    }
    NodalDisplacement {
        max_displacement: worst,
        per_line_counts,
        flagged_lines: flagged,
    }
}

/// Transforms a straightened-tube field into the Laplacian eigenfunction on
/// the image tube: Psi = eps^{-(d-1)/2} h^{-1/2} psi, nodewise.
pub fn reconstruct_laplacian_eigenfunction(
    psi: &[f64],
    jf: &JacobianField,
    grid: &TensorGrid,
) -> Result<Vec<f64>> {
    if psi.len() != jf.h.len() {
        return Err(Error::Domain("field and Jacobian sample counts differ".into()));
    }
    if jf.min_h <= 0.0 {
        return Err(Error::Geometry(format!(
            "Jacobian reaches {:.3e}; the transform needs h > 0",
            jf.min_h
        )));
    }
    let dm1 = grid.t_dims.len() as i32;
    let eps_pow = jf.epsilon.powi(-dm1).sqrt();
    Ok(psi
        .iter()
        .zip(&jf.h)
        .map(|(&p, &h)| eps_pow * p / h.sqrt())
        .collect())
}

/// Norm of an image-tube field in the geometric measure eps^{d-1} h ds dt.
/// By construction the reconstruction preserves this norm exactly, so any
/// drift beyond rounding indicates a broken Jacobian.
pub fn weighted_image_norm(field: &[f64], jf: &JacobianField, grid: &TensorGrid) -> f64 {
    let dm1 = grid.t_dims.len() as i32;
    let w = jf.epsilon.powi(dm1) * grid.cell_volume();
    (field
        .iter()
        .zip(&jf.h)
        .map(|(&x, &h)| h * x * x)
        .sum::<f64>()
        * w)
        .sqrt()
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

/// Number of connected sign domains of psi on the grid graph. Nodes with
/// |psi| below 1e-12 of the max belong to the discrete nodal set and join
/// no domain. Courant's bound says mode n has at most n domains; the tube
/// modes in the decoupled regime have exactly n.
pub fn courant_domains(psi: &[f64], grid: &TensorGrid) -> usize {
    let nt = grid.transverse_len();
    let strides = grid.transverse_strides();
    let mag = psi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if mag == 0.0 {
        return 0;
    }
    let thr = 1e-12 * mag;
    let sign = |idx: usize| -> i8 {
        if psi[idx] > thr {
            1
        } else if psi[idx] < -thr {
            -1
        } else {
            0
        }
    };
    let n = psi.len();
    let mut dsu = Dsu::new(n);
    for i_s in 0..grid.m_s {
        for f in 0..nt {
            let idx = i_s * nt + f;
            let sg = sign(idx);
            if sg == 0 {
                continue;
            }
            if i_s + 1 < grid.m_s && sign(idx + nt) == sg {
                dsu.union(idx, idx + nt);
            }
            for (mu, &stride) in strides.iter().enumerate() {
                let j = (f / stride) % grid.t_dims[mu].m;
                if j + 1 < grid.t_dims[mu].m && sign(idx + stride) == sg {
                    dsu.union(idx, idx + stride);
                }
            }
        }
    }
    let mut roots: Vec<usize> = (0..n)
        .filter(|&i| sign(i) != 0)
        .map(|i| dsu.find(i))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub slope: f64,
    pub stderr: f64,
    pub used: usize,
    pub dropped: usize,
}

/// Ordinary least squares on (log eps, log metric). Nonpositive or
/// non-finite metrics are dropped; fewer than 3 surviving points is an
/// error because two points always fit a line.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<FitOutcome> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(e, m)| *e > 0.0 && *m > 0.0 && m.is_finite())
        .map(|&(e, m)| (e.ln(), m.ln()))
        .collect();
    let dropped = points.len() - usable.len();
    let k = usable.len();
    if k < 3 {
        return Err(Error::RateFit(format!(
            "{k} usable points after dropping {dropped}; need at least 3"
        )));
    }
    let xm = usable.iter().map(|p| p.0).sum::<f64>() / k as f64;
    let ym = usable.iter().map(|p| p.1).sum::<f64>() / k as f64;
    let sxx: f64 = usable.iter().map(|p| (p.0 - xm) * (p.0 - xm)).sum();
    if sxx <= 0.0 {
        return Err(Error::RateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = usable.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = usable
        .iter()
        .map(|p| {
            let r = p.1 - (slope * p.0 + intercept);
            r * r
        })
        .sum();
    let stderr = if k > 2 {
        (ss_res / (k - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(FitOutcome {
        slope,
        stderr,
        used: k,
        dropped,
    })
}

#[derive(Debug, Clone)]
pub struct BracketReport {
    /// The measured assumption constant the brackets were built with.
    pub constant: f64,
    /// max over k of (lower_k - sigma_k)+ : how far the lower bracket
    /// overshoots the true spectrum (0 means the inequality holds).
    pub worst_below: f64,
    /// max over k of (sigma_k - upper_k)+.
    pub worst_above: f64,
    pub dim: usize,
}

/// Assembles T and the two comparison operators with frozen coefficients
/// (1 -+ C eps) and shifted potentials, computes all three full spectra
/// densely, and verifies the sorted interlacing lower_k <= sigma_k <=
/// upper_k. The matrix inequality is exact by construction (flux
/// coefficients ordered pointwise, potentials ordered entrywise given
/// C >= |v0|_inf), so any violation beyond eigensolver rounding is an
/// assembly bug.
pub fn bracketing_check(
    curve: &CurveSpec,
    omega: &CrossSection,
    epsilon: f64,
    grid: &TensorGrid,
) -> Result<BracketReport> {
    let rot = tang_frame_for_grid(curve, grid)?;
    let jf = jacobian_field(curve, &rot, epsilon, grid)?;
    let pot = operators::full_potential(curve, &jf, grid)?;
    let t = operators::assemble_t(&jf, &pot, omega, epsilon, grid)?;
    let consts = operators::measure_assumption_constants(&jf, &pot, grid);
    let c = consts.bracket_constant();
    let (lo, hi) = operators::assemble_bracket(&pot, c, omega, epsilon, grid)?;
    let full = t.dim;
    let st = crate::eigensolve::dense_eigenpairs(&t, full)?;
    let sl = crate::eigensolve::dense_eigenpairs(&lo, full)?;
    let sh = crate::eigensolve::dense_eigenpairs(&hi, full)?;
    let mut worst_below = 0.0f64;
    let mut worst_above = 0.0f64;
    for k in 0..full {
        worst_below = worst_below.max(sl.values[k] - st.values[k]);
        worst_above = worst_above.max(st.values[k] - sh.values[k]);
    }
    Ok(BracketReport {
        constant: c,
        worst_below,
        worst_above,
        dim: full,
    })
}

/// A one-parameter family of straightened operators the sweep can drive:
/// planar/spatial tubes and surface strips both provide a base 1D potential,
/// an eps-indexed assembly, and an eps validity check.
pub trait SweepGeometry: Sync {
    /// v0 on the longitudinal grid; defines the comparison operator S.
    fn base_potential(&self, grid: &TensorGrid) -> PotentialField;
    /// Jacobian and assembled tube operator at one eps.
    fn assemble(&self, eps: f64, grid: &TensorGrid) -> Result<(JacobianField, DiscreteOperator)>;
    /// Fail fast for eps values that are invalid regardless of assembly.
    fn check_eps(&self, eps: f64, grid: &TensorGrid) -> Result<()>;
}

/// Tube family over a fixed curve: the rotation frame is solved once per
/// grid and shared across eps.
pub struct TubeGeometry<'a> {
    curve: &'a CurveSpec,
    rot: RotationPath,
}

impl<'a> TubeGeometry<'a> {
    pub fn new(curve: &'a CurveSpec, grid: &TensorGrid) -> Result<Self> {
        let rot = tang_frame_for_grid(curve, grid)?;
        Ok(TubeGeometry { curve, rot })
    }
}

impl SweepGeometry for TubeGeometry<'_> {
    fn base_potential(&self, grid: &TensorGrid) -> PotentialField {
        operators::effective_potential(self.curve, grid)
    }

    fn assemble(&self, eps: f64, grid: &TensorGrid) -> Result<(JacobianField, DiscreteOperator)> {
        let jf = jacobian_field(self.curve, &self.rot, eps, grid)?;
        let pot = operators::full_potential(self.curve, &jf, grid)?;
        let omega = hull_cross_section(grid)?;
        let t = operators::assemble_t(&jf, &pot, &omega, eps, grid)?;
        Ok((jf, t))
    }

    fn check_eps(&self, eps: f64, grid: &TensorGrid) -> Result<()> {
        let v = check_immersion(self.curve, grid.omega_radius(), eps);
        if !v.pass {
            return Err(Error::Geometry(format!(
                "eps = {eps} is not below eps* = {:.6e}",
                v.eps_star
            )));
        }
        Ok(())
    }
}

/// Cross-section reconstructed from the grid's transverse extents; the grid
/// was built from the cross-section, so this is its box hull.
fn hull_cross_section(grid: &TensorGrid) -> Result<CrossSection> {
    let halves: Vec<f64> = grid.t_dims.iter().map(|d| d.half_extent).collect();
    if halves.len() == 1 {
        CrossSection::interval(halves[0])
    } else {
        CrossSection::rectangle(halves.iter().map(|h| 2.0 * h).collect())
    }
}

/// One (eps, n) measurement row of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub epsilon: f64,
    /// 1-based mode index.
    pub n: usize,
    /// Eigenvalue of the tube operator.
    pub sigma: f64,
    /// Eigenvalue of the 1D comparison operator.
    pub mu: f64,
    /// Laplacian eigenvalue sigma + eps^{-2} E1.
    pub lambda: f64,
    pub gap: f64,
    pub lambda_gap: f64,
    pub overlap: f64,
    pub sup_error: f64,
    pub weighted_error: f64,
    pub nodal_disp: f64,
    pub flagged_lines: usize,
    pub sign_violations: usize,
    pub empirical_margin: f64,
    pub sign_domains: usize,
    pub unitarity_defect: f64,
    pub residual: f64,
    pub clustered: bool,
    pub m_s: usize,
    pub m_t: Vec<usize>,
    pub note: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FitSummary {
    pub metric: String,
    /// 1-based mode index.
    pub n: usize,
    pub slope: f64,
    pub stderr: f64,
    pub points_used: usize,
    /// True when the smallest metric value sits near the solver tolerance,
    /// i.e. the data bottomed out on the discretization/solver floor and the
    /// slope measures the floor, not the physics.
    pub floor_limited: bool,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<SweepRow>,
    pub fits: Vec<FitSummary>,
    /// Lowest N tube eigenvalues pairwise separated at the finest eps.
    pub simple_at_finest: bool,
    /// Every mode n had exactly n sign domains at the finest eps.
    pub courant_ok_at_finest: bool,
    pub e1_analytic: f64,
    pub epsilons: Vec<f64>,
}

pub struct SweepInputs<'a> {
    pub geometry: &'a dyn SweepGeometry,
    pub omega: &'a CrossSection,
    pub grid: &'a TensorGrid,
    /// Strictly decreasing; the last entry is the finest.
    pub epsilons: &'a [f64],
    pub n_pairs: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub solver: &'a dyn EigenSolver,
}

const CLUSTER_REL_TOL: f64 = 1e-6;

fn cluster_flags(values: &[f64]) -> Vec<bool> {
    let mut flags = vec![false; values.len()];
    for k in 0..values.len().saturating_sub(1) {
        let gap = values[k + 1] - values[k];
        if gap < CLUSTER_REL_TOL * values[k + 1].abs().max(1.0) {
            flags[k] = true;
            flags[k + 1] = true;
        }
    }
    flags
}

fn nan_rows(inp: &SweepInputs, epsilon: f64, mu: &[f64], note: &str) -> Vec<SweepRow> {
    (0..inp.n_pairs)
        .map(|k| SweepRow {
            epsilon,
            n: k + 1,
            sigma: f64::NAN,
            mu: mu[k],
            lambda: f64::NAN,
            gap: f64::NAN,
            lambda_gap: f64::NAN,
            overlap: f64::NAN,
            sup_error: f64::NAN,
            weighted_error: f64::NAN,
            nodal_disp: f64::NAN,
            flagged_lines: 0,
            sign_violations: 0,
            empirical_margin: f64::NAN,
            sign_domains: 0,
            unitarity_defect: f64::NAN,
            residual: f64::NAN,
            clustered: false,
            m_s: inp.grid.m_s,
            m_t: inp.grid.t_dims.iter().map(|d| d.m).collect(),
            note: note.to_string(),
        })
        .collect()
}

/// Runs the full measurement pipeline over a decreasing list of eps values:
/// per eps assemble the tube operator, solve, and measure every gap, error,
/// sign and nodal metric against the shared 1D modes; then fit log-log
/// rates per mode for each metric with at least 3 usable points. Rows for a
/// failing eps carry the error in `note` instead of aborting the sweep.
pub fn sweep_epsilon(inp: &SweepInputs) -> Result<ConvergenceReport> {
    if inp.epsilons.is_empty() {
        return Err(Error::Domain("empty eps list".into()));
    }
    if !inp.epsilons.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::Domain("eps values must be strictly decreasing".into()));
    }
    if inp.n_pairs == 0 {
        return Err(Error::Domain("need at least one mode".into()));
    }
    for &eps in inp.epsilons {
        inp.geometry.check_eps(eps, inp.grid)?;
    }

    // shared across eps: the 1D modes, their nodal data, and the transverse
    // ground mode
    let pot0 = inp.geometry.base_potential(inp.grid);
    let s_op = operators::assemble_s(&pot0, inp.grid)?;
    let s_res = inp.solver.solve(&s_op, inp.n_pairs, inp.tolerance, inp.seed)?;
    let nodal: Vec<NodalData1D> = s_res
        .vectors
        .iter()
        .enumerate()
        .map(|(k, phi)| nodal_points_1d(phi, inp.grid.length, k + 1))
        .collect::<Result<_>>()?;
    let j1 = cross_section::j1_discrete(inp.omega, inp.grid)?;
    let refs = reference_modes(&s_res.vectors, &j1);
    let e1 = cross_section::e1_analytic(inp.omega);
    let cv = inp.grid.cell_volume();

    let row_sets: Vec<Vec<SweepRow>> = inp
        .epsilons
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| -> Vec<SweepRow> {
            let seed = inp.seed.wrapping_add(1 + i as u64);
            let solved = (|| -> Result<(JacobianField, EigenResult)> {
                let (jf, t) = inp.geometry.assemble(eps, inp.grid)?;
                let res = inp.solver.solve(&t, inp.n_pairs, inp.tolerance, seed)?;
                Ok((jf, res))
            })();
            let (jf, res) = match solved {
                Ok(x) => x,
                Err(e) => return nan_rows(inp, eps, &s_res.values, &e.to_string()),
            };
            let clustered = cluster_flags(&res.values);
            let shift = e1 / (eps * eps);
            (0..inp.n_pairs)
                .map(|k| {
                    let sigma = res.values[k];
                    let mu = s_res.values[k];
                    let lambda = sigma + shift;
                    let unitarity_defect = reconstruct_laplacian_eigenfunction(&res.vectors[k], &jf, inp.grid)
                        .map(|big| (weighted_image_norm(&big, &jf, inp.grid) - 1.0).abs())
                        .unwrap_or(f64::NAN);
                    let sign_domains = courant_domains(&res.vectors[k], inp.grid);
                    let mut row = SweepRow {
                        epsilon: eps,
                        n: k + 1,
                        sigma,
                        mu,
                        lambda,
                        gap: (sigma - mu).abs(),
                        lambda_gap: (lambda - (mu + shift)).abs(),
                        overlap: f64::NAN,
                        sup_error: f64::NAN,
                        weighted_error: f64::NAN,
                        nodal_disp: f64::NAN,
                        flagged_lines: 0,
                        sign_violations: 0,
                        empirical_margin: f64::NAN,
                        sign_domains,
                        unitarity_defect,
                        residual: res.residuals[k],
                        clustered: clustered[k],
                        m_s: inp.grid.m_s,
                        m_t: inp.grid.t_dims.iter().map(|d| d.m).collect(),
                        note: String::new(),
                    };
                    if clustered[k] {
                        row.note = "clustered eigenvalue; per-mode comparisons skipped".into();
                        return row;
                    }
                    match align_mode(&res.vectors[k], &refs[k], cv, k + 1) {
                        Err(e) => row.note = e.to_string(),
                        Ok((psi, overlap)) => {
                            row.overlap = overlap;
                            let (sup, weighted) = eigenfunction_errors(&psi, &refs[k], inp.omega, inp.grid);
                            row.sup_error = sup;
                            row.weighted_error = weighted;
                            let disp = nodal_displacement(&psi, &nodal[k], inp.grid);
                            row.nodal_disp = disp.max_displacement;
                            row.flagged_lines = disp.flagged_lines;
                            let sa = sign_agreement(&psi, &nodal[k], inp.grid.ds, inp.grid);
                            row.sign_violations = sa.violations;
                            row.empirical_margin = sa.empirical_margin;
                        }
                    }
                    row
                })
                .collect()
        })
        .collect();

    let rows: Vec<SweepRow> = row_sets.into_iter().flatten().collect();

    // rate fits per mode and metric
    let metrics: [(&str, fn(&SweepRow) -> f64); 4] = [
        ("value_gap", |r| r.gap),
        ("sup_error", |r| r.sup_error),
        ("weighted_error", |r| r.weighted_error),
        ("nodal_displacement", |r| r.nodal_disp),
    ];
    let mut fits = Vec::new();
    for k in 0..inp.n_pairs {
        for (name, get) in &metrics {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.n == k + 1 && r.note.is_empty())
                .map(|r| (r.epsilon, get(r)))
                .collect();
            let floor_limited = points
                .iter()
                .filter(|(_, m)| m.is_finite())
                .fold(f64::INFINITY, |acc, &(_, m)| acc.min(m))
                <= 100.0 * inp.tolerance;
            match fit_rate(&points) {
                Ok(fit) => fits.push(FitSummary {
                    metric: name.to_string(),
                    n: k + 1,
                    slope: fit.slope,
                    stderr: fit.stderr,
                    points_used: fit.used,
                    floor_limited,
                    note: String::new(),
                }),
                Err(e) => fits.push(FitSummary {
                    metric: name.to_string(),
                    n: k + 1,
                    slope: f64::NAN,
                    stderr: f64::NAN,
                    points_used: points.len(),
                    floor_limited,
                    note: e.to_string(),
                }),
            }
        }
    }

    let finest = *inp.epsilons.last().expect("nonempty");
    let finest_rows: Vec<&SweepRow> = rows.iter().filter(|r| r.epsilon == finest).collect();
    let simple_at_finest = !finest_rows.is_empty()
        && finest_rows.iter().all(|r| !r.clustered && r.sigma.is_finite());
    let courant_ok_at_finest = simple_at_finest && finest_rows.iter().all(|r| r.sign_domains == r.n);

    Ok(ConvergenceReport {
        rows,
        fits,
        simple_at_finest,
        courant_ok_at_finest,
        e1_analytic: e1,
        epsilons: inp.epsilons.to_vec(),
    })
}

/// Shared setup used by the validation pipeline and tests: frame, Jacobian,
/// potentials and tube operator for one eps.
pub fn tube_operator(
    curve: &CurveSpec,
    omega: &CrossSection,
    epsilon: f64,
    grid: &TensorGrid,
) -> Result<(RotationPath, JacobianField, operators::PotentialField, operators::DiscreteOperator)> {
    let rot = tang_frame_for_grid(curve, grid)?;
    let jf = jacobian_field(curve, &rot, epsilon, grid)?;
    let pot = operators::full_potential(curve, &jf, grid)?;
    let t = operators::assemble_t(&jf, &pot, omega, epsilon, grid)?;
    Ok((rot, jf, pot, t))
}
