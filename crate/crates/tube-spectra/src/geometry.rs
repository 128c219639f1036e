//! Curve geometry: generalized curvatures, the moving-frame rotation, and the
//! Jacobian of the straightening map.
//!
//! A unit-speed curve in R^d carries a frame whose derivative is a
//! skew-symmetric matrix K with nonzero entries only on the first
//! super/subdiagonal, K_{i,i+1} = kappa_i. The transverse frame used here
//! rotates against the lower-right (d-1) x (d-1) block K' of K, solving
//! R' + R K' = 0 (derivative in s), which kills the twist terms of the metric.
//! The straightened volume element is then eps^{d-1} h(s, t) with
//!
//! ```text
//! h(s, t) = 1 - eps kappa_1(s) sum_mu R_{mu 2}(s) t_mu,
//! ```
//!
//! and the s-derivatives of h have closed forms in K, its derivatives, and R.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::TensorGrid;
use crate::profile::CurvatureProfile;

pub struct CurveSpec {
    /// Ambient dimension d >= 2.
    pub dim: usize,
    pub length: f64,
    /// kappa_1, evaluable with two derivatives.
    pub kappa1: Box<dyn CurvatureProfile>,
    /// kappa_2 .. kappa_{d-1}, each evaluable with one derivative.
    pub higher: Vec<Box<dyn CurvatureProfile>>,
    /// Bound C on max(|kappa_1|_C2, |kappa_mu|_C1).
    pub c_gamma: f64,
}

impl CurveSpec {
    /// Builds and validates a curve. When `c_gamma` is absent the measured
    /// supremum over a fine sample is used.
    pub fn new(
        dim: usize,
        length: f64,
        kappa1: Box<dyn CurvatureProfile>,
        higher: Vec<Box<dyn CurvatureProfile>>,
        c_gamma: Option<f64>,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain(format!("ambient dimension must be >= 2, got {dim}")));
        }
        if higher.len() != dim - 2 {
            return Err(Error::Domain(format!(
                "dimension {dim} needs {} higher curvature(s), got {}",
                dim - 2,
                higher.len()
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Domain(format!("curve length must be positive, got {length}")));
        }
        let measured = measured_norm(&kappa1, &higher, length);
        let c_gamma = match c_gamma {
            Some(c) => {
                if measured > c * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::Domain(format!(
                        "curvature norms reach {measured:.6e}, above the declared bound {c:.6e}"
                    )));
                }
                c
            }
            None => measured,
        };
        Ok(CurveSpec {
            dim,
            length,
            kappa1,
            higher,
            c_gamma,
        })
    }

    /// Straight segment of the given length.
    pub fn straight(dim: usize, length: f64) -> Result<Self> {
        let zero = crate::profile::build_profile("zero", &toml::value::Table::new(), length)?;
        let higher = (0..dim.saturating_sub(2))
            .map(|_| crate::profile::build_profile("zero", &toml::value::Table::new(), length))
            .collect::<Result<Vec<_>>>()?;
        CurveSpec::new(dim, length, zero, higher, None)
    }

    fn check_s(&self, s: f64) -> Result<()> {
        if !(0.0..=self.length + 1e-12).contains(&s) {
            return Err(Error::Domain(format!(
                "arclength {s} outside [0, {}]",
                self.length
            )));
        }
        Ok(())
    }

    /// All curvatures at s: [kappa_1, ..., kappa_{d-1}].
    fn kappas(&self, s: f64) -> Vec<f64> {
        let mut k = Vec::with_capacity(self.dim - 1);
        k.push(self.kappa1.value(s));
        k.extend(self.higher.iter().map(|p| p.value(s)));
        k
    }

    fn kappa_dots(&self, s: f64) -> Vec<f64> {
        let mut k = Vec::with_capacity(self.dim - 1);
        k.push(self.kappa1.d1(s));
        k.extend(self.higher.iter().map(|p| p.d1(s)));
        k
    }
}

fn measured_norm(
    kappa1: &Box<dyn CurvatureProfile>,
    higher: &[Box<dyn CurvatureProfile>],
    length: f64,
) -> f64 {
    let samples = 4001;
    let mut sup: f64 = 0.0;
    for i in 0..=samples {
        let s = length * i as f64 / samples as f64;
        sup = sup
            .max(kappa1.value(s).abs())
            .max(kappa1.d1(s).abs())
            .max(kappa1.d2(s).abs());
        for p in higher {
            sup = sup.max(p.value(s).abs()).max(p.d1(s).abs());
        }
    }
    sup
}

/// Frame-derivative matrix at a point: K itself, its lower-right block K',
/// and the pieces of its first column the Jacobian formulas need.
#[derive(Debug, Clone)]
pub struct FrenetMatrix {
    /// Full d x d matrix, skew, nonzero only next to the diagonal.
    pub full: DMatrix<f64>,
    /// Lower-right (d-1) x (d-1) block (transverse indices).
    pub block: DMatrix<f64>,
}

/// K at arclength s. Entries K_{i,i+1} = kappa_i, K_{i+1,i} = -kappa_i.
pub fn frenet_matrix(curve: &CurveSpec, s: f64) -> Result<FrenetMatrix> {
    curve.check_s(s)?;
    Ok(frenet_from_kappas(&curve.kappas(s), curve.dim))
}

fn frenet_from_kappas(kappas: &[f64], dim: usize) -> FrenetMatrix {
    let mut full = DMatrix::zeros(dim, dim);
    for (i, &k) in kappas.iter().enumerate() {
        full[(i, i + 1)] = k;
        full[(i + 1, i)] = -k;
    }
    let block = full.view((1, 1), (dim - 1, dim - 1)).into_owned();
    FrenetMatrix { full, block }
}

/// K' block alone, from the curvature list kappa_2.. (kappa_1 does not enter).
fn kprime_from(higher: &[f64], dm1: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(dm1, dm1);
    for (i, &k) in higher.iter().enumerate() {
        b[(i, i + 1)] = k;
        b[(i + 1, i)] = -k;
    }
    b
}

/// Solution of the transverse frame equation on a uniform s-grid.
pub struct RotationPath {
    /// n_steps + 1 uniform samples of s in [0, L].
    pub s: Vec<f64>,
    /// R'(s_k): (d-1) x (d-1) rotations.
    pub mats: Vec<DMatrix<f64>>,
    /// Largest Frobenius defect |R R^T - I|_F seen before correction.
    pub max_drift: f64,
    /// Number of polar re-orthonormalizations applied.
    pub corrections: usize,
}

/// Integrates dR/ds = -R K'(s), R(0) = I, with fixed-step RK4, projecting
/// back onto the rotation group whenever roundoff drift exceeds 1e-9.
pub fn solve_tang_frame(curve: &CurveSpec, n_steps: usize) -> Result<RotationPath> {
    if n_steps == 0 {
        return Err(Error::Domain("frame integration needs at least one step".into()));
    }
    let dm1 = curve.dim - 1;
    let h = curve.length / n_steps as f64;
    let kprime = |s: f64| -> DMatrix<f64> {
        let higher: Vec<f64> = curve.higher.iter().map(|p| p.value(s)).collect();
        kprime_from(&higher, dm1)
    };
    let rhs = |s: f64, r: &DMatrix<f64>| -> DMatrix<f64> { -(r * kprime(s)) };

    let mut mats = Vec::with_capacity(n_steps + 1);
    let mut s_grid = Vec::with_capacity(n_steps + 1);
    let mut r = DMatrix::identity(dm1, dm1);
    let mut max_drift = 0.0f64;
    let mut corrections = 0usize;
    mats.push(r.clone());
    s_grid.push(0.0);
    for k in 0..n_steps {
        let s = k as f64 * h;
        let k1 = rhs(s, &r);
        let k2 = rhs(s + 0.5 * h, &(&r + &k1 * (0.5 * h)));
        let k3 = rhs(s + 0.5 * h, &(&r + &k2 * (0.5 * h)));
        let k4 = rhs(s + h, &(&r + &k3 * h));
        r += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let drift = orthogonality_defect(&r);
        max_drift = max_drift.max(drift);
        if drift > 1e-9 {
            r = polar_rotation(&r)?;
            corrections += 1;
        }
        mats.push(r.clone());
        s_grid.push((k as f64 + 1.0) * h);
    }
    Ok(RotationPath {
        s: s_grid,
        mats,
        max_drift,
        corrections,
    })
}

pub fn orthogonality_defect(r: &DMatrix<f64>) -> f64 {
    let d = r.nrows();
    let g = r * r.transpose() - DMatrix::<f64>::identity(d, d);
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Nearest rotation in the polar sense, by the Newton iteration
/// X <- (X + X^{-T}) / 2. Quadratically convergent near the group.
pub fn polar_rotation(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut x = r.clone();
    for _ in 0..30 {
        let inv_t = x
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Geometry("frame matrix became singular".into()))?
            .transpose();
        x = (&x + inv_t) * 0.5;
        if orthogonality_defect(&x) < 1e-15 * x.nrows() as f64 {
            break;
        }
    }
    if x.determinant() < 0.0 {
        return Err(Error::Geometry("frame left the rotation component".into()));
    }
    Ok(x)
}

/// Jacobian h of the straightening map and its s-derivatives, sampled on a
/// grid; h is also kept at the longitudinal midpoints the flux stencil uses.
pub struct JacobianField {
    pub epsilon: f64,
    /// h at grid nodes, lexicographic.
    pub h: Vec<f64>,
    /// h at (s_{i+1/2}, t) planes, i = 0..=m_s, each of transverse length.
    pub h_mid: Vec<f64>,
    /// First s-derivative of h at nodes.
    pub d1h: Vec<f64>,
    /// Second s-derivative of h at nodes.
    pub d11h: Vec<f64>,
    /// Transverse gradient of h at nodes (surface strips only; planar and
    /// spatial tubes use the closed form -eps kappa_1 R_{mu 2}).
    pub dth: Option<Vec<f64>>,
    /// sup over nodes and directions of |d h / d t_mu|.
    pub sup_dth: f64,
    pub min_h: f64,
    pub max_h: f64,
}

impl JacobianField {
    pub fn h_mid_at(&self, plane: usize, t_flat: usize, nt: usize) -> f64 {
        self.h_mid[plane * nt + t_flat]
    }
}

/// Result of the immersion estimate 1 - C a eps <= h <= 1 + C a eps.
#[derive(Debug, Clone)]
pub struct ValidityReport {
    pub lower: f64,
    pub upper: f64,
    /// Threshold eps* = 1 / (C_Gamma a); the tube needs eps < eps*.
    pub eps_star: f64,
    pub pass: bool,
}

/// Uniform ellipticity check for the Jacobian, from the declared curvature
/// bound and the cross-section radius a = sup |t|.
pub fn check_immersion(curve: &CurveSpec, omega_radius: f64, epsilon: f64) -> ValidityReport {
    let c_a = curve.c_gamma * omega_radius;
    let eps_star = if c_a > 0.0 { 1.0 / c_a } else { f64::INFINITY };
    ValidityReport {
        lower: 1.0 - c_a * epsilon,
        upper: 1.0 + c_a * epsilon,
        eps_star,
        pass: epsilon > 0.0 && epsilon < eps_star,
    }
}

/// Samples h, its closed-form s-derivatives, and the midpoint planes.
///
/// The rotation path must hold samples at every node and midpoint of the
/// grid, i.e. 2 (m_s + 1) steps over [0, L].
pub fn jacobian_field(
    curve: &CurveSpec,
    rot: &RotationPath,
    epsilon: f64,
    grid: &TensorGrid,
) -> Result<JacobianField> {
    let dm1 = curve.dim - 1;
    if grid.t_dims.len() != dm1 {
        return Err(Error::Assembly(format!(
            "curve in dimension {} needs {} transverse grid direction(s), got {}",
            curve.dim,
            dm1,
            grid.t_dims.len()
        )));
    }
    if (grid.length - curve.length).abs() > 1e-12 * curve.length.max(1.0) {
        return Err(Error::Assembly("grid and curve disagree on the length".into()));
    }
    let expected = 2 * (grid.m_s + 1);
    if rot.mats.len() != expected + 1 {
        return Err(Error::Assembly(format!(
            "rotation path has {} samples; the grid needs {} (nodes and midpoints)",
            rot.mats.len(),
            expected + 1
        )));
    }
    let immersion = check_immersion(curve, grid.omega_radius(), epsilon);
    if !immersion.pass {
        return Err(Error::Geometry(format!(
            "eps = {epsilon} is not below eps* = {:.6e}; the tube may self-intersect",
            immersion.eps_star
        )));
    }

    let nt = grid.transverse_len();
    let t_coords: Vec<Vec<f64>> = (0..nt).map(|f| grid.t_coords(f)).collect();

    // coefficient c(s) with h = 1 - c . t : c = eps kappa_1 (first column of R')
    let coeff = |rot_idx: usize, s: f64| -> Vec<f64> {
        let r = &rot.mats[rot_idx];
        let k1 = curve.kappa1.value(s);
        (0..dm1).map(|mu| epsilon * k1 * r[(mu, 0)]).collect()
    };

    let mut h = vec![0.0; grid.len()];
    let mut d1h = vec![0.0; grid.len()];
    let mut d11h = vec![0.0; grid.len()];
    let mut h_mid = vec![0.0; (grid.m_s + 1) * nt];
    let mut sup_dth = 0.0f64;
    let mut min_h = f64::INFINITY;
    let mut max_h = f64::NEG_INFINITY;

    for i_s in 0..grid.m_s {
        let s = grid.s_node(i_s);
        let rot_idx = 2 * (i_s + 1);
        let c = coeff(rot_idx, s);
        sup_dth = sup_dth.max(c.iter().fold(0.0f64, |m, v| m.max(v.abs())));

        // first-column vectors of K restricted to transverse indices
        let kappas = curve.kappas(s);
        let kdots = curve.kappa_dots(s);
        let k1dd = curve.kappa1.d2(s);
        let kp = kprime_from(&kappas[1..], dm1);
        let kp_dot = kprime_from(&kdots[1..], dm1);
        let mut col = nalgebra::DVector::zeros(dm1);
        col[0] = -kappas[0];
        let mut col_dot = nalgebra::DVector::zeros(dm1);
        col_dot[0] = -kdots[0];
        let mut col_ddot = nalgebra::DVector::zeros(dm1);
        col_ddot[0] = -k1dd;

        let r = &rot.mats[rot_idx];
        let p = r * (&col_dot - &kp * &col);
        let q = r * (&col_ddot - &kp_dot * &col - &kp * &col_dot * 2.0 + &kp * (&kp * &col));

        for (f, t) in t_coords.iter().enumerate() {
            let idx = i_s * nt + f;
            let mut hv = 1.0;
            let mut d1 = 0.0;
            let mut d2 = 0.0;
            for mu in 0..dm1 {
                hv -= c[mu] * t[mu];
                d1 += epsilon * p[mu] * t[mu];
                d2 += epsilon * q[mu] * t[mu];
            }
            h[idx] = hv;
            d1h[idx] = d1;
            d11h[idx] = d2;
            min_h = min_h.min(hv);
            max_h = max_h.max(hv);
        }
    }

    for plane in 0..=grid.m_s {
        let s = grid.s_midpoint(plane);
        let c = coeff(2 * plane + 1, s);
        for (f, t) in t_coords.iter().enumerate() {
            let mut hv = 1.0;
            for mu in 0..dm1 {
                hv -= c[mu] * t[mu];
            }
            h_mid[plane * nt + f] = hv;
            min_h = min_h.min(hv);
            max_h = max_h.max(hv);
        }
    }

    if min_h <= 0.0 {
        return Err(Error::Geometry(format!(
            "Jacobian reaches {min_h:.3e} <= 0; the straightening map degenerates"
        )));
    }
    Ok(JacobianField {
        epsilon,
        h,
        h_mid,
        d1h,
        d11h,
        dth: None,
        sup_dth,
        min_h,
        max_h,
    })
}

/// Rotation path sized for a grid: samples at all nodes and midpoints.
pub fn tang_frame_for_grid(curve: &CurveSpec, grid: &TensorGrid) -> Result<RotationPath> {
    solve_tang_frame(curve, 2 * (grid.m_s + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::CrossSection;
    use crate::profile::build_profile;
    use std::f64::consts::PI;

    fn constant_profile(v: f64, length: f64) -> Box<dyn CurvatureProfile> {
        let mut t = toml::value::Table::new();
        t.insert("value".into(), toml::Value::Float(v));
        build_profile("constant", &t, length).unwrap()
    }

    fn sine_profile(a: f64, length: f64) -> Box<dyn CurvatureProfile> {
        let mut t = toml::value::Table::new();
        t.insert("amplitude".into(), toml::Value::Float(a));
        build_profile("sine", &t, length).unwrap()
    }

    fn planar_curve(kappa: f64, length: f64) -> CurveSpec {
        CurveSpec::new(2, length, constant_profile(kappa, length), vec![], None).unwrap()
    }

    #[test]
    fn frenet_planar_zero() {
        let c = CurveSpec::straight(2, 1.0).unwrap();
        let k = frenet_matrix(&c, 0.5).unwrap();
        assert_eq!(k.full, DMatrix::zeros(2, 2));
        assert_eq!(k.block, DMatrix::zeros(1, 1));
    }

    #[test]
    fn frenet_spatial_entries() {
        let c = CurveSpec::new(
            3,
            2.0,
            constant_profile(1.0, 2.0),
            vec![constant_profile(2.0, 2.0)],
            None,
        )
        .unwrap();
        let k = frenet_matrix(&c, 1.0).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 2.0, 0.0, -2.0, 0.0]);
        assert_eq!(k.full, expected);
        // skew, tridiagonal-sparse
        assert_eq!(k.full.transpose(), -k.full.clone());
    }

    #[test]
    fn frenet_from_spline_matches_direct() {
        // sampled curvatures fed through a spline agree with the direct table
        let length = 2.0;
        let n = 100;
        let s: Vec<f64> = (0..=n).map(|i| length * i as f64 / n as f64).collect();
        let k1: Vec<f64> = s.iter().map(|&x| 0.5 + 0.1 * x).collect();
        let mut t = toml::value::Table::new();
        t.insert(
            "s".into(),
            toml::Value::Array(s.iter().map(|&v| toml::Value::Float(v)).collect()),
        );
        t.insert(
            "kappa".into(),
            toml::Value::Array(k1.iter().map(|&v| toml::Value::Float(v)).collect()),
        );
        let sampled = build_profile("sampled", &t, length).unwrap();
        let c4 = CurveSpec::new(
            4,
            length,
            sampled,
            vec![constant_profile(0.3, length), constant_profile(0.2, length)],
            None,
        )
        .unwrap();
        let k = frenet_matrix(&c4, 1.0).unwrap();
        let mut expected = DMatrix::zeros(4, 4);
        for (i, &v) in [0.6, 0.3, 0.2].iter().enumerate() {
            expected[(i, i + 1)] = v;
            expected[(i + 1, i)] = -v;
        }
        assert!((k.full.clone() - expected).norm() < 1e-6);
    }

    #[test]
    fn frame_is_trivial_in_the_plane() {
        let c = planar_curve(1.0, PI);
        let rot = solve_tang_frame(&c, 64).unwrap();
        for m in &rot.mats {
            assert_eq!(m.nrows(), 1);
            assert!((m[(0, 0)] - 1.0).abs() < 1e-14);
        }
        assert_eq!(rot.corrections, 0);
    }

    #[test]
    fn frame_constant_torsion_is_a_rotation_block() {
        let tau = 0.8;
        let length = 2.0;
        let c = CurveSpec::new(
            3,
            length,
            constant_profile(1.0, length),
            vec![constant_profile(tau, length)],
            None,
        )
        .unwrap();
        let rot = solve_tang_frame(&c, 400).unwrap();
        for (k, m) in rot.mats.iter().enumerate() {
            let s = rot.s[k];
            let (c0, s0) = ((tau * s).cos(), (tau * s).sin());
            assert!((m[(0, 0)] - c0).abs() < 1e-9, "s={s}");
            assert!((m[(0, 1)] + s0).abs() < 1e-9);
            assert!((m[(1, 0)] - s0).abs() < 1e-9);
            assert!((m[(1, 1)] - c0).abs() < 1e-9);
        }
    }

    #[test]
    fn frame_stays_orthogonal_with_unit_determinant() {
        let length = 3.0;
        let c = CurveSpec::new(
            3,
            length,
            sine_profile(1.0, length),
            vec![sine_profile(0.7, length)],
            None,
        )
        .unwrap();
        let rot = solve_tang_frame(&c, 500).unwrap();
        for m in rot.mats.iter().step_by(50) {
            assert!(orthogonality_defect(m) <= 1e-9);
            assert!((m.determinant() - 1.0).abs() < 1e-9);
        }
        assert!(rot.max_drift < 1e-6);
    }

    #[test]
    fn frame_linear_torsion_matches_refined_reference() {
        // kappa_2(s) = s has the closed primitive s^2/2; against a 10x refined
        // run the coarse integration must agree to 1e-8
        let length = 1.5;
        let n = 1500;
        let s: Vec<f64> = (0..=n).map(|i| length * i as f64 / n as f64).collect();
        let tau: Vec<f64> = s.clone();
        let mk = |l: f64| {
            let mut t = toml::value::Table::new();
            t.insert(
                "s".into(),
                toml::Value::Array(s.iter().map(|&v| toml::Value::Float(v)).collect()),
            );
            t.insert(
                "kappa".into(),
                toml::Value::Array(tau.iter().map(|&v| toml::Value::Float(v)).collect()),
            );
            build_profile("sampled", &t, l).unwrap()
        };
        let c = CurveSpec::new(3, length, constant_profile(0.5, length), vec![mk(length)], None).unwrap();
        let coarse = solve_tang_frame(&c, 200).unwrap();
        let fine = solve_tang_frame(&c, 2000).unwrap();
        let last_c = &coarse.mats[200];
        let last_f = &fine.mats[2000];
        assert!((last_c - last_f).norm() < 1e-8);
        // angle = integral of tau = L^2/2
        let angle = length * length / 2.0;
        assert!((last_f[(0, 0)] - angle.cos()).abs() < 1e-6);
    }

    #[test]
    fn jacobian_planar_constant_curvature() {
        let c = planar_curve(1.0, PI);
        let omega = CrossSection::interval(1.0).unwrap();
        let grid = TensorGrid::new(PI, 16, &omega, 12).unwrap();
        let rot = tang_frame_for_grid(&c, &grid).unwrap();
        let eps = 0.1;
        let jf = jacobian_field(&c, &rot, eps, &grid).unwrap();
        let nt = grid.transverse_len();
        for i_s in 0..grid.m_s {
            for f in 0..nt {
                let t = grid.t_node(0, f);
                let idx = i_s * nt + f;
                assert!((jf.h[idx] - (1.0 - eps * t)).abs() < 1e-14);
                assert!(jf.d1h[idx].abs() < 1e-14);
                assert!(jf.d11h[idx].abs() < 1e-14);
            }
        }
        // ellipticity window
        assert!(jf.min_h >= 1.0 - 1.0 * 1.0 * eps - 1e-12);
        assert!(jf.max_h <= 1.0 + 1.0 * 1.0 * eps + 1e-12);
    }

    #[test]
    fn jacobian_straight_tube_is_identity() {
        let c = CurveSpec::straight(3, 2.0).unwrap();
        let omega = CrossSection::rectangle(vec![1.0, 1.0]).unwrap();
        let grid = TensorGrid::new(2.0, 10, &omega, 8).unwrap();
        let rot = tang_frame_for_grid(&c, &grid).unwrap();
        let jf = jacobian_field(&c, &rot, 0.2, &grid).unwrap();
        assert!(jf.h.iter().all(|&v| v == 1.0));
        assert!(jf.h_mid.iter().all(|&v| v == 1.0));
        assert!(jf.d1h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jacobian_derivatives_match_differencing() {
        // d=3, sinusoidal kappa_1, constant kappa_2: compare the closed-form
        // d1h against central differences of h at two resolutions
        let length = PI;
        let omega = CrossSection::rectangle(vec![1.0, 1.0]).unwrap();
        let eps = 0.05;
        let curve = || {
            CurveSpec::new(
                3,
                length,
                sine_profile(1.0, length),
                vec![constant_profile(1.0, length)],
                None,
            )
            .unwrap()
        };
        let err_at = |m_s: usize| -> f64 {
            let c = curve();
            let grid = TensorGrid::new(length, m_s, &omega, 8).unwrap();
            let rot = tang_frame_for_grid(&c, &grid).unwrap();
            let jf = jacobian_field(&c, &rot, eps, &grid).unwrap();
            let nt = grid.transverse_len();
            let mut worst = 0.0f64;
            for i_s in 1..grid.m_s - 1 {
                for f in 0..nt {
                    let fd = (jf.h[(i_s + 1) * nt + f] - jf.h[(i_s - 1) * nt + f]) / (2.0 * grid.ds);
                    worst = worst.max((fd - jf.d1h[i_s * nt + f]).abs());
                }
            }
            worst
        };
        let coarse = err_at(40);
        let fine = err_at(80);
        let order = (coarse / fine).log2();
        assert!(order > 1.9, "observed order {order}");
    }

    #[test]
    fn jacobian_second_derivative_matches_differencing() {
        let length = PI;
        let omega = CrossSection::interval(1.0).unwrap();
        let eps = 0.05;
        let err_at = |m_s: usize| -> f64 {
            let c = CurveSpec::new(2, length, sine_profile(1.0, length), vec![], None).unwrap();
            let grid = TensorGrid::new(length, m_s, &omega, 8).unwrap();
            let rot = tang_frame_for_grid(&c, &grid).unwrap();
            let jf = jacobian_field(&c, &rot, eps, &grid).unwrap();
            let nt = grid.transverse_len();
            let mut worst = 0.0f64;
            for i_s in 1..grid.m_s - 1 {
                for f in 0..nt {
                    let fd = (jf.h[(i_s + 1) * nt + f] - 2.0 * jf.h[i_s * nt + f]
                        + jf.h[(i_s - 1) * nt + f])
                        / (grid.ds * grid.ds);
                    worst = worst.max((fd - jf.d11h[i_s * nt + f]).abs());
                }
            }
            worst
        };
        let order = (err_at(40) / err_at(80)).log2();
        assert!(order > 1.9, "observed order {order}");
    }

    #[test]
    fn derivative_bounds_hold() {
        // |1 - h^2|, |d1h|, |d11h|, |dth| against their curvature-norm bounds
        let length = PI;
        let c = CurveSpec::new(2, length, sine_profile(1.3, length), vec![], None).unwrap();
        let omega = CrossSection::interval(0.8).unwrap();
        let grid = TensorGrid::new(length, 60, &omega, 30).unwrap();
        let rot = tang_frame_for_grid(&c, &grid).unwrap();
        let eps = 0.08;
        let jf = jacobian_field(&c, &rot, eps, &grid).unwrap();
        let a = omega.radius();
        let sample = |f: &dyn Fn(f64) -> f64| -> f64 {
            (0..=2000)
                .map(|i| f(length * i as f64 / 2000.0).abs())
                .fold(0.0, f64::max)
        };
        let k_sup = sample(&|s| c.kappa1.value(s));
        let kd_sup = sample(&|s| c.kappa1.d1(s));
        let kdd_sup = sample(&|s| c.kappa1.d2(s));
        // |K| = |kappa_1| in the plane
        let tol = 1e-12;
        for idx in 0..grid.len() {
            assert!((1.0 - jf.h[idx] * jf.h[idx]).abs() <= eps * a * k_sup * (2.0 + eps * a * k_sup) + tol);
            assert!(jf.d1h[idx].abs() <= eps * a * (kd_sup + k_sup * k_sup) + tol);
            assert!(
                jf.d11h[idx].abs()
                    <= eps * a * (kdd_sup + 3.0 * kd_sup * k_sup + k_sup * k_sup * k_sup) + tol
            );
        }
        // the transverse gradient of h carries no factor of a
        assert!(jf.sup_dth <= eps * k_sup + tol);
    }

    #[test]
    fn immersion_cases() {
        let c1 = planar_curve(1.0, 1.0); // C_Gamma = 1
        let r1 = check_immersion(&c1, 1.0, 0.1);
        assert!(r1.pass);
        assert!((r1.lower - 0.9).abs() < 1e-14 && (r1.upper - 1.1).abs() < 1e-14);

        let c2 = CurveSpec::new(2, 1.0, constant_profile(2.0, 1.0), vec![], Some(2.0)).unwrap();
        let r2 = check_immersion(&c2, 1.0, 0.5);
        assert!(!r2.pass); // eps equals eps* exactly
        assert!((r2.eps_star - 0.5).abs() < 1e-14);

        let c3 = CurveSpec::new(2, 1.0, constant_profile(1.0, 1.0), vec![], Some(1.0)).unwrap();
        let r3 = check_immersion(&c3, 0.5, 0.1);
        assert!(r3.pass);
        assert!((r3.lower - 0.95).abs() < 1e-14 && (r3.upper - 1.05).abs() < 1e-14);
    }

    #[test]
    fn jacobian_rejects_oversized_eps() {
        let c = planar_curve(2.0, 1.0);
        let omega = CrossSection::interval(1.0).unwrap();
        let grid = TensorGrid::new(1.0, 10, &omega, 8).unwrap();
        let rot = tang_frame_for_grid(&c, &grid).unwrap();
        let err = jacobian_field(&c, &rot, 0.5, &grid).err().unwrap();
        assert!(err.to_string().contains("eps*"));
    }

    #[test]
    fn declared_bound_is_enforced() {
        let err = CurveSpec::new(2, 1.0, constant_profile(2.0, 1.0), vec![], Some(1.0)).err().unwrap();
        assert!(err.to_string().contains("above the declared bound"));
    }
}
