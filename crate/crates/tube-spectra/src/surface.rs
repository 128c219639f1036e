//! Geodesic strips on curved surfaces.
//!
//! In Fermi coordinates (s, u) around a curve with geodesic curvature
//! kappa(s), the volume Jacobian H of the strip satisfies the Jacobi equation
//! d2H/du2 + K H = 0 with H(s, 0) = 1 and dH/du(s, 0) = -kappa(s), K being
//! the Gauss curvature of the surface. On the reference cross-section
//! t = u / eps in (-1, 1) this becomes, for h(s, t) = H(s, eps t),
//!
//! ```text
//! d2h/dt2 = -eps^2 K(s, eps t) h,   h(s, 0) = 1,  dh/dt(s, 0) = -eps kappa(s)
//! ```
//!
//! — note K is sampled at the physical distance eps t, which is what makes
//! the potential collapse onto the center-line value as eps shrinks. There is
//! no closed form for general K, so h is integrated per s-sample from t = 0
//! outward in both
//! directions (classical RK4, one step per node gap). The s-derivatives of h
//! feed the effective potential, and differencing them would inject noise into
//! the stiffest term, so they are integrated alongside h via the variational
//! equations obtained by differentiating the ODE in s:
//!
//! ```text
//! g'' = -eps^2 (K_s h + K g),             g = d h / d s,
//! w'' = -eps^2 (K_ss h + 2 K_s g + K w),  w = d2 h / d s2,
//! ```
//!
//! which is why Gauss curvatures must expose two closed-form s-derivatives.
//! The transverse derivative of h is a by-product of the integration, and the
//! transverse Laplacian of h is the Jacobi equation itself, so the full
//! potential
//!
//! ```text
//! V = -(5/4) g^2 / h^4 + w / (2 h^3) - (dh/dt)^2 / (4 eps^2 h^2) - K / 2
//! ```
//!
//! needs no differencing at all. On the center line V(s, 0) collapses to the
//! strip's 1D potential v0(s) = -kappa(s)^2 / 4 - K(s, 0) / 2 exactly. A flat
//! surface (K = 0) reproduces the planar tube pipeline entry for entry: the
//! ODE solutions are then linear in t and RK4 integrates them exactly.

use crate::analysis::SweepGeometry;
use crate::cross_section::CrossSection;
use crate::error::{Error, Result};
use crate::geometry::JacobianField;
use crate::grid::TensorGrid;
use crate::operators::{self, DiscreteOperator, OperatorKind, PotentialField};
use crate::profile::{require_f64, CurvatureProfile};

/// Gauss curvature of the ambient surface in Fermi coordinates: `u` is the
/// physical signed distance from the curve (the strip samples it at eps t,
/// never at the reference coordinate t itself). Two s-derivatives in closed
/// form; the variational equations above consume them.
pub trait GaussCurvature: Send + Sync {
    fn value(&self, s: f64, u: f64) -> f64;
    /// d K / d s.
    fn d1(&self, s: f64, u: f64) -> f64;
    /// d2 K / d s2.
    fn d11(&self, s: f64, u: f64) -> f64;
    fn name(&self) -> &'static str;
}

type GaussBuilder = fn(&toml::value::Table) -> Result<Box<dyn GaussCurvature>>;

/// Name -> constructor table for config-selected Gauss curvatures. These are
/// closed-form presets; tabulated K is out of scope.
pub static GAUSS_REGISTRY: &[(&str, GaussBuilder)] = &[
    ("constant", build_constant),
    ("cos", build_cos),
    ("product", build_product),
];

pub fn build_gauss(kind: &str, params: &toml::value::Table) -> Result<Box<dyn GaussCurvature>> {
    for (name, builder) in GAUSS_REGISTRY {
        if *name == kind {
            return builder(params);
        }
    }
    let known: Vec<&str> = GAUSS_REGISTRY.iter().map(|(n, _)| *n).collect();
    Err(Error::Config(format!(
        "unknown Gauss curvature kind {kind:?}; known kinds: {}",
        known.join(", ")
    )))
}

struct ConstantGauss {
    value: f64,
}

impl GaussCurvature for ConstantGauss {
    fn value(&self, _s: f64, _u: f64) -> f64 {
        self.value
    }
    fn d1(&self, _s: f64, _u: f64) -> f64 {
        0.0
    }
    fn d11(&self, _s: f64, _u: f64) -> f64 {
        0.0
    }
    fn name(&self) -> &'static str {
        "constant"
    }
}

fn build_constant(params: &toml::value::Table) -> Result<Box<dyn GaussCurvature>> {
    let value = require_f64(params, "value", Some(0.0))?;
    if !value.is_finite() {
        return Err(Error::Config("Gauss curvature value must be finite".into()));
    }
    Ok(Box::new(ConstantGauss { value }))
}

/// K(s, u) = A cos(f s + phase), independent of u.
struct CosGauss {
    amplitude: f64,
    frequency: f64,
    phase: f64,
}

impl GaussCurvature for CosGauss {
    fn value(&self, s: f64, _u: f64) -> f64 {
        self.amplitude * (self.frequency * s + self.phase).cos()
    }
    fn d1(&self, s: f64, _u: f64) -> f64 {
        -self.amplitude * self.frequency * (self.frequency * s + self.phase).sin()
    }
    fn d11(&self, s: f64, _u: f64) -> f64 {
        -self.amplitude * self.frequency * self.frequency * (self.frequency * s + self.phase).cos()
    }
    fn name(&self) -> &'static str {
        "cos"
    }
}

fn build_cos(params: &toml::value::Table) -> Result<Box<dyn GaussCurvature>> {
    let amplitude = require_f64(params, "amplitude", Some(1.0))?;
    let frequency = require_f64(params, "frequency", Some(1.0))?;
    let phase = require_f64(params, "phase", Some(0.0))?;
    if !(amplitude.is_finite() && frequency.is_finite() && phase.is_finite()) {
        return Err(Error::Config("cos Gauss curvature parameters must be finite".into()));
    }
    Ok(Box::new(CosGauss {
        amplitude,
        frequency,
        phase,
    }))
}

/// K(s, u) = A cos(f s + phase) cos(g u): the simplest preset that actually
/// varies across the strip width.
struct ProductGauss {
    amplitude: f64,
    s_frequency: f64,
    phase: f64,
    t_frequency: f64,
}

impl ProductGauss {
    fn t_factor(&self, u: f64) -> f64 {
        (self.t_frequency * u).cos()
    }
}

impl GaussCurvature for ProductGauss {
    fn value(&self, s: f64, u: f64) -> f64 {
        self.amplitude * (self.s_frequency * s + self.phase).cos() * self.t_factor(u)
    }
    fn d1(&self, s: f64, u: f64) -> f64 {
        -self.amplitude * self.s_frequency * (self.s_frequency * s + self.phase).sin() * self.t_factor(u)
    }
    fn d11(&self, s: f64, u: f64) -> f64 {
        -self.amplitude
            * self.s_frequency
            * self.s_frequency
            * (self.s_frequency * s + self.phase).cos()
            * self.t_factor(u)
    }
    fn name(&self) -> &'static str {
        "product"
    }
}

fn build_product(params: &toml::value::Table) -> Result<Box<dyn GaussCurvature>> {
    let amplitude = require_f64(params, "amplitude", Some(1.0))?;
    let s_frequency = require_f64(params, "s_frequency", Some(1.0))?;
    let phase = require_f64(params, "phase", Some(0.0))?;
    let t_frequency = require_f64(params, "t_frequency", Some(1.0))?;
    if !(amplitude.is_finite() && s_frequency.is_finite() && phase.is_finite() && t_frequency.is_finite()) {
        return Err(Error::Config("product Gauss curvature parameters must be finite".into()));
    }
    Ok(Box::new(ProductGauss {
        amplitude,
        s_frequency,
        phase,
        t_frequency,
    }))
}

/// A strip of half-width eps around a curve with geodesic curvature kappa on a
/// surface with Gauss curvature K; the reference cross-section is (-1, 1).
pub struct SurfaceStripSpec {
    pub length: f64,
    pub kappa: Box<dyn CurvatureProfile>,
    pub gauss: Box<dyn GaussCurvature>,
}

impl SurfaceStripSpec {
    /// Validates the data on a sample lattice: kappa with two derivatives and
    /// K with two s-derivatives must be finite everywhere on [0, L] x [-1, 1].
    pub fn new(
        length: f64,
        kappa: Box<dyn CurvatureProfile>,
        gauss: Box<dyn GaussCurvature>,
    ) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Domain(format!("strip length must be positive, got {length}")));
        }
        let n_s = 201;
        let n_t = 17;
        for i in 0..=n_s {
            let s = length * i as f64 / n_s as f64;
            if !(kappa.value(s).is_finite() && kappa.d1(s).is_finite() && kappa.d2(s).is_finite()) {
                return Err(Error::Domain(format!(
                    "geodesic curvature or a derivative is not finite at s = {s:.6}"
                )));
            }
            for j in 0..=n_t {
                let t = -1.0 + 2.0 * j as f64 / n_t as f64;
                if !(gauss.value(s, t).is_finite()
                    && gauss.d1(s, t).is_finite()
                    && gauss.d11(s, t).is_finite())
                {
                    return Err(Error::Domain(format!(
                        "Gauss curvature or an s-derivative is not finite at (s, t) = ({s:.6}, {t:.6})"
                    )));
                }
            }
        }
        Ok(SurfaceStripSpec {
            length,
            kappa,
            gauss,
        })
    }
}

/// Six-component state of one transverse integration line:
/// (h, dh/dt, g, dg/dt, w, dw/dt) with g = d1 h and w = d11 h.
#[derive(Debug, Clone, Copy)]
struct JacobiState {
    h: f64,
    ht: f64,
    g: f64,
    gt: f64,
    w: f64,
    wt: f64,
}

impl JacobiState {
    fn initial(spec: &SurfaceStripSpec, epsilon: f64, s: f64) -> Self {
        JacobiState {
            h: 1.0,
            ht: -epsilon * spec.kappa.value(s),
            g: 0.0,
            gt: -epsilon * spec.kappa.d1(s),
            w: 0.0,
            wt: -epsilon * spec.kappa.d2(s),
        }
    }

    fn axpy(self, tau: f64, d: JacobiState) -> JacobiState {
        JacobiState {
            h: self.h + tau * d.h,
            ht: self.ht + tau * d.ht,
            g: self.g + tau * d.g,
            gt: self.gt + tau * d.gt,
            w: self.w + tau * d.w,
            wt: self.wt + tau * d.wt,
        }
    }
}

/// Right-hand side of the first-order system at reference coordinate t; the
/// curvature is sampled at the physical point (s, eps t).
fn jacobi_rhs(spec: &SurfaceStripSpec, epsilon: f64, s: f64, t: f64, y: JacobiState) -> JacobiState {
    let e2 = epsilon * epsilon;
    let u = epsilon * t;
    let k = spec.gauss.value(s, u);
    let k1 = spec.gauss.d1(s, u);
    let k11 = spec.gauss.d11(s, u);
    JacobiState {
        h: y.ht,
        ht: -e2 * k * y.h,
        g: y.gt,
        gt: -e2 * (k1 * y.h + k * y.g),
        w: y.wt,
        wt: -e2 * (k11 * y.h + 2.0 * k1 * y.g + k * y.w),
    }
}

fn rk4_step(spec: &SurfaceStripSpec, epsilon: f64, s: f64, t: f64, y: JacobiState, tau: f64) -> JacobiState {
    let k1 = jacobi_rhs(spec, epsilon, s, t, y);
    let k2 = jacobi_rhs(spec, epsilon, s, t + 0.5 * tau, y.axpy(0.5 * tau, k1));
    let k3 = jacobi_rhs(spec, epsilon, s, t + 0.5 * tau, y.axpy(0.5 * tau, k2));
    let k4 = jacobi_rhs(spec, epsilon, s, t + tau, y.axpy(tau, k3));
    let mut out = y;
    let sixth = tau / 6.0;
    out = out.axpy(sixth, k1);
    out = out.axpy(2.0 * sixth, k2);
    out = out.axpy(2.0 * sixth, k3);
    out = out.axpy(sixth, k4);
    out
}

/// Integrates one line at fixed s through the target t-values, which must move
/// monotonically away from 0 (last target of the opposite sign not allowed).
/// Each node gap is covered by `substeps` RK4 steps; 1 is the working
/// resolution, larger values serve as step-refinement oracles.
fn integrate_line(
    spec: &SurfaceStripSpec,
    epsilon: f64,
    s: f64,
    targets: &[f64],
    substeps: usize,
) -> Vec<JacobiState> {
    let mut out = Vec::with_capacity(targets.len());
    let mut t = 0.0;
    let mut y = JacobiState::initial(spec, epsilon, s);
    for &target in targets {
        let tau = (target - t) / substeps as f64;
        for _ in 0..substeps {
            y = rk4_step(spec, epsilon, s, t, y, tau);
            t += tau;
        }
        t = target;
        out.push(y);
    }
    out
}

fn check_strip_grid(spec: &SurfaceStripSpec, grid: &TensorGrid) -> Result<()> {
    if grid.t_dims.len() != 1 {
        return Err(Error::Assembly(format!(
            "surface strips are two-dimensional; the grid has {} transverse directions",
            grid.t_dims.len()
        )));
    }
    if (grid.t_dims[0].half_extent - 1.0).abs() > 1e-12 {
        return Err(Error::Assembly(format!(
            "strip cross-section must be (-1, 1), got half-extent {}",
            grid.t_dims[0].half_extent
        )));
    }
    if (grid.length - spec.length).abs() > 1e-12 * spec.length.max(1.0) {
        return Err(Error::Assembly("grid and strip disagree on the length".into()));
    }
    Ok(())
}

/// Splits the transverse nodes into the two outward integration runs: target
/// t-values for the positive direction (ascending, starting at the center
/// node when the node count is odd) and the negative direction (descending),
/// together with the node index each target belongs to.
fn outward_targets(grid: &TensorGrid) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
    let m_t = grid.t_dims[0].m;
    let quarter = 0.25 * grid.t_dims[0].dt;
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for j in 0..m_t {
        let t = grid.t_node(0, j);
        if t >= -quarter {
            pos.push((j, t));
        } else {
            neg.push((j, t));
        }
    }
    neg.reverse();
    (pos, neg)
}

/// Integrates the Jacobi equation and its variational system on every s-node
/// and s-midpoint of the grid. Fails with a focal-point error if h does not
/// stay positive: the strip then exceeds the scale of the injectivity radius
/// and the coordinates are meaningless.
pub fn solve_jacobi_h(
    spec: &SurfaceStripSpec,
    epsilon: f64,
    grid: &TensorGrid,
) -> Result<JacobianField> {
    solve_jacobi_h_refined(spec, epsilon, grid, 1)
}

/// As `solve_jacobi_h` with `substeps` RK4 steps per node gap.
pub fn solve_jacobi_h_refined(
    spec: &SurfaceStripSpec,
    epsilon: f64,
    grid: &TensorGrid,
    substeps: usize,
) -> Result<JacobianField> {
    check_strip_grid(spec, grid)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Domain(format!("eps must be positive, got {epsilon}")));
    }
    if substeps == 0 {
        return Err(Error::Domain("substeps must be at least 1".into()));
    }
    let nt = grid.transverse_len();
    let (pos, neg) = outward_targets(grid);
    let pos_t: Vec<f64> = pos.iter().map(|&(_, t)| t).collect();
    let neg_t: Vec<f64> = neg.iter().map(|&(_, t)| t).collect();

    let mut h = vec![0.0; grid.len()];
    let mut d1h = vec![0.0; grid.len()];
    let mut d11h = vec![0.0; grid.len()];
    let mut dth = vec![0.0; grid.len()];
    let mut h_mid = vec![0.0; (grid.m_s + 1) * nt];
    let mut sup_dth = 0.0f64;
    let mut min_h = f64::INFINITY;
    let mut max_h = f64::NEG_INFINITY;

    let integrate_plane = |s: f64| -> Vec<(usize, JacobiState)> {
        let mut out = Vec::with_capacity(nt);
        for (run, t_vals) in [(&pos, &pos_t), (&neg, &neg_t)] {
            let states = integrate_line(spec, epsilon, s, t_vals, substeps);
            out.extend(run.iter().map(|&(j, _)| j).zip(states));
        }
        out
    };

    for i_s in 0..grid.m_s {
        for (j, y) in integrate_plane(grid.s_node(i_s)) {
            let idx = i_s * nt + j;
            h[idx] = y.h;
            d1h[idx] = y.g;
            d11h[idx] = y.w;
            dth[idx] = y.ht;
            min_h = min_h.min(y.h);
            max_h = max_h.max(y.h);
            sup_dth = sup_dth.max(y.ht.abs());
        }
    }
    for plane in 0..=grid.m_s {
        for (j, y) in integrate_plane(grid.s_midpoint(plane)) {
            h_mid[plane * nt + j] = y.h;
            min_h = min_h.min(y.h);
            max_h = max_h.max(y.h);
            sup_dth = sup_dth.max(y.ht.abs());
        }
    }

    if min_h <= 0.0 {
        return Err(Error::Geometry(format!(
            "focal point inside the strip: min h = {min_h:.6e} at eps = {epsilon}; \
             the strip is wider than the surface's focusing scale"
        )));
    }
    Ok(JacobianField {
        epsilon,
        h,
        h_mid,
        d1h,
        d11h,
        dth: Some(dth),
        sup_dth,
        min_h,
        max_h,
    })
}

/// Strip 1D potential v0(s) = -kappa(s)^2 / 4 - K(s, 0) / 2 on the s-nodes;
/// equals V on the center line exactly (h = 1, d1 h = 0, dh/dt = -eps kappa
/// there, so every h-dependent term collapses).
pub fn surface_effective_potential(spec: &SurfaceStripSpec, grid: &TensorGrid) -> PotentialField {
    let v0 = (0..grid.m_s)
        .map(|i| {
            let s = grid.s_node(i);
            let k = spec.kappa.value(s);
            -k * k / 4.0 - spec.gauss.value(s, 0.0) / 2.0
        })
        .collect();
    PotentialField { v0, full: None }
}

/// Full strip potential
///     V = -(5/4) (d1 h)^2 / h^4 + (d11 h) / (2 h^3)
///         - (dh/dt)^2 / (4 eps^2 h^2) - K / 2,
/// with the transverse Laplacian of h eliminated through the Jacobi equation,
/// so the eps^{-2}-scaled terms carry no differencing error.
pub fn surface_full_potential(
    spec: &SurfaceStripSpec,
    jf: &JacobianField,
    grid: &TensorGrid,
) -> Result<PotentialField> {
    check_strip_grid(spec, grid)?;
    if jf.h.len() != grid.len() {
        return Err(Error::Assembly("Jacobian field does not match the grid".into()));
    }
    let dth = jf
        .dth
        .as_ref()
        .ok_or_else(|| Error::Assembly("strip potential needs the transverse derivative of h".into()))?;
    if jf.min_h <= 0.0 {
        return Err(Error::Geometry(format!(
            "Jacobian minimum {:.3e} is not positive",
            jf.min_h
        )));
    }
    let e2 = jf.epsilon * jf.epsilon;
    let nt = grid.transverse_len();
    let mut full = vec![0.0; grid.len()];
    for i_s in 0..grid.m_s {
        let s = grid.s_node(i_s);
        for f in 0..nt {
            let idx = i_s * nt + f;
            let u = jf.epsilon * grid.t_node(0, f);
            let h = jf.h[idx];
            let h2 = h * h;
            let g = jf.d1h[idx];
            let w = jf.d11h[idx];
            let ht = dth[idx];
            full[idx] = -1.25 * g * g / (h2 * h2) + w / (2.0 * h2 * h)
                - ht * ht / (4.0 * e2 * h2)
                - spec.gauss.value(s, u) / 2.0;
        }
    }
    Ok(PotentialField {
        v0: surface_effective_potential(spec, grid).v0,
        full: Some(full),
    })
}

/// Strip operator T on the grid: the common flux-form assembly with a = h^{-2}
/// from the Jacobi solution and the full strip potential.
pub fn assemble_surface_t(
    spec: &SurfaceStripSpec,
    jf: &JacobianField,
    grid: &TensorGrid,
) -> Result<DiscreteOperator> {
    let pot = surface_full_potential(spec, jf, grid)?;
    let omega = CrossSection::interval(1.0)?;
    let mut t = operators::assemble_t(jf, &pot, &omega, jf.epsilon, grid)?;
    t.meta.kind = OperatorKind::SurfaceStrip;
    Ok(t)
}

/// Strip family at fixed kappa and K, driven by the eps-sweep.
pub struct SurfaceGeometry<'a> {
    pub spec: &'a SurfaceStripSpec,
}

impl SweepGeometry for SurfaceGeometry<'_> {
    fn base_potential(&self, grid: &TensorGrid) -> PotentialField {
        surface_effective_potential(self.spec, grid)
    }

    fn assemble(&self, eps: f64, grid: &TensorGrid) -> Result<(JacobianField, DiscreteOperator)> {
        let jf = solve_jacobi_h(self.spec, eps, grid)?;
        let t = assemble_surface_t(self.spec, &jf, grid)?;
        Ok((jf, t))
    }

    // Positivity of h cannot be checked without integrating, so eps validity
    // beyond sign/finiteness is established a posteriori by `assemble`.
    fn check_eps(&self, eps: f64, _grid: &TensorGrid) -> Result<()> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Domain(format!("eps must be positive, got {eps}")));
        }
        Ok(())
    }
}
