//! The four batch pipelines behind the CLI subcommands.
//!
//! `spectrum` solves one geometry at the finest eps and tabulates eigenvalues
//! of T next to the 1D comparison values. `sweep` drives the eps-convergence
//! engine and writes rows plus fitted rates. `nodal` writes every zero
//! crossing of every computed mode with its distance to the predicted 1D
//! nodal set. `validate` runs the five internal consistency suites and prints
//! one pass/fail line each.
//!
//! Pipelines return `Ok(true)` on full success and `Ok(false)` when the run
//! completed but the result is a failure (all sweep rows failed, a validation
//! suite failed); hard errors bubble up as `Err`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    self, sweep_epsilon, SweepGeometry, SweepInputs, TubeGeometry,
};
use crate::config::{Mode, Problem, RunConfig};
use crate::cross_section::{self, CrossSection};
use crate::eigensolve::{build_eigensolver, dense_eigenpairs};
use crate::error::Result;
use crate::geometry::CurveSpec;
use crate::grid::TensorGrid;
use crate::operators;
use crate::profile::build_profile;
use crate::report::{
    self, NodalCrossing, NodalModeSummary, NodalSummary, RunMeta, SpectrumRow, SpectrumSummary,
    SuiteResult, SweepSummary, ValidateSummary,
};
use crate::surface::SurfaceGeometry;

pub fn run(cfg: &RunConfig) -> Result<bool> {
    match cfg.mode {
        Mode::Spectrum => run_spectrum(cfg),
        Mode::Sweep => run_sweep(cfg),
        Mode::Nodal => run_nodal(cfg),
        Mode::Validate => run_validate(cfg),
    }
}

/// Owns whichever geometry family the config picked; borrows the problem.
enum Geometry<'a> {
    Tube(TubeGeometry<'a>),
    Strip(SurfaceGeometry<'a>),
}

impl<'a> Geometry<'a> {
    fn build(problem: &'a Problem, grid: &TensorGrid) -> Result<Self> {
        match problem {
            Problem::Tube { curve, .. } => Ok(Geometry::Tube(TubeGeometry::new(curve, grid)?)),
            Problem::Strip { spec } => Ok(Geometry::Strip(SurfaceGeometry { spec })),
        }
    }

    fn as_dyn(&self) -> &dyn SweepGeometry {
        match self {
            Geometry::Tube(g) => g,
            Geometry::Strip(g) => g,
        }
    }
}

fn problem_grid(cfg: &RunConfig) -> Result<TensorGrid> {
    TensorGrid::new(cfg.problem.length(), cfg.m_s, &cfg.problem.omega(), cfg.m_t)
}

/// Writes the operator as COO triplets (lower triangle) next to the tables.
fn export_matrix(dir: &Path, name: &str, op: &operators::DiscreteOperator) -> Result<()> {
    let path = report::matrix_path(dir, name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(&path)?);
    op.export_coo(&mut w)
}

fn run_spectrum(cfg: &RunConfig) -> Result<bool> {
    let grid = problem_grid(cfg)?;
    let eps = cfg.finest_eps();
    let geom = Geometry::build(&cfg.problem, &grid)?;
    let g = geom.as_dyn();
    g.check_eps(eps, &grid)?;

    let solver = build_eigensolver(&cfg.solver)?;
    let pot0 = g.base_potential(&grid);
    let s_op = operators::assemble_s(&pot0, &grid)?;
    let s_res = solver.solve(&s_op, cfg.n_pairs, cfg.tolerance, cfg.seed)?;
    let (jf, t_op) = g.assemble(eps, &grid)?;
    let t_res = solver.solve(&t_op, cfg.n_pairs, cfg.tolerance, cfg.seed.wrapping_add(1))?;

    let e1 = cross_section::e1_analytic(&cfg.problem.omega());
    let shift = e1 / (eps * eps);
    let rows: Vec<SpectrumRow> = (0..cfg.n_pairs)
        .map(|k| {
            let sigma = t_res.values[k];
            let mu = s_res.values[k];
            SpectrumRow {
                n: k + 1,
                sigma,
                mu,
                lambda: sigma + shift,
                gap: (sigma - mu).abs(),
                residual: t_res.residuals[k],
            }
        })
        .collect();

    let unitarity_defects: Vec<f64> = t_res
        .vectors
        .iter()
        .map(|psi| {
            analysis::reconstruct_laplacian_eigenfunction(psi, &jf, &grid)
                .map(|big| (analysis::weighted_image_norm(&big, &jf, &grid) - 1.0).abs())
                .unwrap_or(f64::NAN)
        })
        .collect();
    let sign_domains: Vec<usize> = t_res
        .vectors
        .iter()
        .map(|psi| analysis::courant_domains(psi, &grid))
        .collect();

    if cfg.export_matrices {
        export_matrix(&cfg.out_dir, "operator_t", &t_op)?;
        export_matrix(&cfg.out_dir, "operator_s", &s_op)?;
    }

    let meta = RunMeta::from_config(cfg);
    report::write_spectrum_csv(&report::report_csv_path(&cfg.out_dir), &meta, &rows)?;
    let summary = SpectrumSummary {
        meta,
        epsilon: eps,
        e1_analytic: e1,
        e1_discrete: cross_section::e1_discrete(&grid),
        spectral_floor: t_op.meta.spectral_floor,
        min_h: jf.min_h,
        max_h: jf.max_h,
        rows,
        unitarity_defects,
        sign_domains,
    };
    report::write_summary_json(&report::summary_json_path(&cfg.out_dir), &summary)?;
    Ok(true)
}

fn run_sweep(cfg: &RunConfig) -> Result<bool> {
    let grid = problem_grid(cfg)?;
    let geom = Geometry::build(&cfg.problem, &grid)?;
    let solver = build_eigensolver(&cfg.solver)?;
    let omega = cfg.problem.omega();
    let rep = sweep_epsilon(&SweepInputs {
        geometry: geom.as_dyn(),
        omega: &omega,
        grid: &grid,
        epsilons: &cfg.epsilons,
        n_pairs: cfg.n_pairs,
        tolerance: cfg.tolerance,
        seed: cfg.seed,
        solver: solver.as_ref(),
    })?;

    let meta = RunMeta::from_config(cfg);
    report::write_sweep_csv(&report::report_csv_path(&cfg.out_dir), &meta, &rep.rows)?;
    report::write_summary_json(
        &report::summary_json_path(&cfg.out_dir),
        &SweepSummary::new(meta, &rep),
    )?;
    // per-eps failures are recorded in their rows; only a sweep with no
    // usable row at all counts as a failed run
    Ok(rep.rows.iter().any(|r| r.sigma.is_finite()))
}

fn run_nodal(cfg: &RunConfig) -> Result<bool> {
    let grid = problem_grid(cfg)?;
    let eps = cfg.finest_eps();
    let geom = Geometry::build(&cfg.problem, &grid)?;
    let g = geom.as_dyn();
    g.check_eps(eps, &grid)?;

    let solver = build_eigensolver(&cfg.solver)?;
    let pot0 = g.base_potential(&grid);
    let s_op = operators::assemble_s(&pot0, &grid)?;
    let s_res = solver.solve(&s_op, cfg.n_pairs, cfg.tolerance, cfg.seed)?;
    let (_jf, t_op) = g.assemble(eps, &grid)?;
    let t_res = solver.solve(&t_op, cfg.n_pairs, cfg.tolerance, cfg.seed.wrapping_add(1))?;

    let omega = cfg.problem.omega();
    let j1 = cross_section::j1_discrete(&omega, &grid)?;
    let refs = analysis::reference_modes(&s_res.vectors, &j1);
    let cv = grid.cell_volume();
    let nodal: Vec<analysis::NodalData1D> = s_res
        .vectors
        .iter()
        .enumerate()
        .map(|(k, phi)| analysis::nodal_points_1d(phi, grid.length, k + 1))
        .collect::<Result<_>>()?;
    let coords = report::line_coordinates(&grid);

    let meta = RunMeta::from_config(cfg);
    let mut modes = Vec::with_capacity(cfg.n_pairs);
    let mut succeeded = 0usize;
    for k in 0..cfg.n_pairs {
        let n = k + 1;
        match analysis::align_mode(&t_res.vectors[k], &refs[k], cv, n) {
            Err(e) => modes.push(NodalModeSummary {
                n,
                zeros_1d: nodal[k].interior.clone(),
                max_displacement: f64::NAN,
                flagged_lines: 0,
                empirical_margin: f64::NAN,
                sign_domains: 0,
                crossings_file: String::new(),
                note: e.to_string(),
            }),
            Ok((psi, _overlap)) => {
                let lines = analysis::line_crossings(&psi, &grid);
                let mut crossings = Vec::new();
                for (f, xs) in lines.iter().enumerate() {
                    for (j, &s) in xs.iter().enumerate() {
                        crossings.push(NodalCrossing {
                            line: f,
                            t: coords[f].clone(),
                            k: j,
                            s,
                            dist_1d: nodal[k].dist_interior(s),
                            line_count: xs.len(),
                        });
                    }
                }
                let path = report::nodal_csv_path(&cfg.out_dir, n);
                report::write_nodal_csv(&path, &meta, n, &crossings)?;
                let disp = analysis::nodal_displacement(&psi, &nodal[k], &grid);
                let sa = analysis::sign_agreement(&psi, &nodal[k], grid.ds, &grid);
                modes.push(NodalModeSummary {
                    n,
                    zeros_1d: nodal[k].interior.clone(),
                    max_displacement: disp.max_displacement,
                    flagged_lines: disp.flagged_lines,
                    empirical_margin: sa.empirical_margin,
                    sign_domains: analysis::courant_domains(&psi, &grid),
                    crossings_file: format!("nodal_{n}.csv"),
                    note: String::new(),
                });
                succeeded += 1;
            }
        }
    }

    report::write_summary_json(
        &report::summary_json_path(&cfg.out_dir),
        &NodalSummary {
            meta,
            epsilon: eps,
            modes,
        },
    )?;
    Ok(succeeded > 0)
}

// ---------- validate ----------

fn run_validate(cfg: &RunConfig) -> Result<bool> {
    let suites = [
        suite_oracle_equivalence(cfg)?,
        suite_sturm(cfg)?,
        suite_poincare(cfg)?,
        suite_unitarity(cfg)?,
        suite_kronecker(cfg)?,
    ];
    for s in &suites {
        println!("{:<22} {}  {}", s.name, if s.pass { "PASS" } else { "FAIL" }, s.detail);
    }
    let pass = suites.iter().all(|s| s.pass);
    report::write_summary_json(
        &report::summary_json_path(&cfg.out_dir),
        &ValidateSummary {
            meta: RunMeta::from_config(cfg),
            suites: suites.into_iter().collect(),
            pass,
        },
    )?;
    Ok(pass)
}

fn sine_curve(amplitude: f64, periods: f64, length: f64) -> Result<CurveSpec> {
    let mut params = toml::value::Table::new();
    params.insert("amplitude".into(), toml::Value::Float(amplitude));
    params.insert("periods".into(), toml::Value::Float(periods));
    let kappa = build_profile("sine", &params, length)?;
    CurveSpec::new(2, length, kappa, Vec::new(), None)
}

fn constant_curve(value: f64, length: f64, dim: usize) -> Result<CurveSpec> {
    let mut params = toml::value::Table::new();
    params.insert("value".into(), toml::Value::Float(value));
    let kappa = build_profile("constant", &params, length)?;
    let higher = (0..dim.saturating_sub(2))
        .map(|_| build_profile("zero", &toml::value::Table::new(), length))
        .collect::<Result<Vec<_>>>()?;
    CurveSpec::new(dim, length, kappa, higher, None)
}

/// Lanczos agrees with the dense solver on a batch of randomly drawn small
/// tubes: same lowest eigenvalues to 1e-8 relative.
fn suite_oracle_equivalence(cfg: &RunConfig) -> Result<SuiteResult> {
    let lanczos = build_eigensolver("lanczos")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(101));
    let mut worst: f64 = 0.0;
    let cases = 12usize;
    for case in 0..cases {
        let spatial = case % 6 == 5;
        let length = rng.gen_range(1.5..4.0);
        let amplitude = rng.gen_range(0.1..0.6);
        let periods = if rng.gen::<bool>() { 1.0 } else { 2.0 };
        let eps = rng.gen_range(0.05..0.12);
        let (curve, omega, m_s, m_t) = if spatial {
            (
                constant_curve(amplitude, length, 3)?,
                CrossSection::rectangle(vec![2.0, 2.0])?,
                rng.gen_range(10..=12),
                8usize,
            )
        } else {
            (
                sine_curve(amplitude, periods, length)?,
                CrossSection::interval(1.0)?,
                rng.gen_range(16..=24),
                rng.gen_range(8..=12),
            )
        };
        let grid = TensorGrid::new(length, m_s, &omega, m_t)?;
        let geom = TubeGeometry::new(&curve, &grid)?;
        let (_jf, op) = geom.assemble(eps, &grid)?;
        let n = 3;
        let fast = lanczos.solve(&op, n, 1e-10, cfg.seed.wrapping_add(case as u64))?;
        let exact = dense_eigenpairs(&op, n)?;
        for k in 0..n {
            let rel = (fast.values[k] - exact.values[k]).abs() / exact.values[k].abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    Ok(SuiteResult {
        name: "oracle-equivalence".into(),
        pass: worst <= 1e-8,
        detail: format!("{cases} random operators, worst relative eigenvalue gap {worst:.3e}"),
    })
}

/// The 1D comparison operator has simple eigenvalues inside the Weyl bracket
/// with interlacing zero counts, for a spread of curvature presets.
fn suite_sturm(cfg: &RunConfig) -> Result<SuiteResult> {
    let length = std::f64::consts::PI;
    let omega = CrossSection::interval(1.0)?;
    let grid = TensorGrid::new(length, 400, &omega, 8)?;
    let solver = build_eigensolver(&cfg.solver)?;
    // (curve, sup |v0|)
    let cases: Vec<(CurveSpec, f64, &str)> = vec![
        (CurveSpec::straight(2, length)?, 0.0, "straight"),
        (constant_curve(1.0, length, 2)?, 0.25, "constant"),
        (sine_curve(0.8, 2.0, length)?, 0.16, "sine"),
    ];
    let mut fails = Vec::new();
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    for (curve, c_bound, tag) in &cases {
        let pot = operators::effective_potential(curve, &grid);
        let s = operators::assemble_s(&pot, &grid)?;
        let res = solver.solve(&s, 6, 1e-11, cfg.seed.wrapping_add(7))?;
        // stencil eigenvalue error is n^4 ds^2 / 12 ~ 6.6e-3 at n = 6, m = 400
        let rep = analysis::verify_sturm_properties(&res, length, *c_bound, 1e-2)?;
        worst_excess = worst_excess.max(rep.bracket_excess);
        if !rep.pass {
            fails.push(*tag);
        }
    }
    Ok(SuiteResult {
        name: "sturm-brackets".into(),
        pass: fails.is_empty(),
        detail: if fails.is_empty() {
            format!("{} presets, n <= 6, worst bracket excess {worst_excess:.3e}", cases.len())
        } else {
            format!("failed presets: {}", fails.join(", "))
        },
    })
}

/// Discrete Poincare inequality: the transverse stencil's Rayleigh quotient
/// never dips below its lowest eigenvalue, over a batch of random vectors.
fn suite_poincare(cfg: &RunConfig) -> Result<SuiteResult> {
    let omega = cfg.problem.omega();
    let grid = TensorGrid::new(cfg.problem.length(), cfg.m_s, &omega, cfg.m_t)?;
    let e1d = cross_section::e1_discrete(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(313));
    let nt = grid.transverse_len();
    let mut min_ratio = f64::INFINITY;
    let trials = 1000usize;
    for _ in 0..trials {
        let psi: Vec<f64> = (0..nt).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if psi.iter().all(|&x| x == 0.0) {
            continue;
        }
        min_ratio = min_ratio.min(cross_section::poincare_ratio(&grid, &psi)?);
    }
    let pass = min_ratio >= e1d - 1e-9 * e1d.abs().max(1.0);
    Ok(SuiteResult {
        name: "poincare".into(),
        pass,
        detail: format!("{trials} random vectors, min ratio {min_ratio:.12e} vs E1 {e1d:.12e}"),
    })
}

/// The inverse change of variables maps normalized straightened modes to
/// normalized Laplacian modes: weighted image norm 1 to 1e-10.
fn suite_unitarity(cfg: &RunConfig) -> Result<SuiteResult> {
    let length = std::f64::consts::PI;
    let curve = constant_curve(0.25, length, 2)?;
    let omega = CrossSection::interval(1.0)?;
    let grid = TensorGrid::new(length, 120, &omega, 16)?;
    let geom = TubeGeometry::new(&curve, &grid)?;
    let eps = 0.1;
    let (jf, op) = geom.assemble(eps, &grid)?;
    let solver = build_eigensolver(&cfg.solver)?;
    let res = solver.solve(&op, 3, 1e-10, cfg.seed.wrapping_add(29))?;
    let mut worst: f64 = 0.0;
    for psi in &res.vectors {
        let big = analysis::reconstruct_laplacian_eigenfunction(psi, &jf, &grid)?;
        worst = worst.max((analysis::weighted_image_norm(&big, &jf, &grid) - 1.0).abs());
    }
    Ok(SuiteResult {
        name: "unitarity".into(),
        pass: worst <= 1e-10,
        detail: format!("3 reconstructed modes, worst norm defect {worst:.3e}"),
    })
}

/// For a straight tube the assembled operator is a Kronecker sum, so its
/// spectrum is exactly (longitudinal stencil) + (transverse stencil - E1)/eps^2.
fn suite_kronecker(_cfg: &RunConfig) -> Result<SuiteResult> {
    let length = std::f64::consts::PI;
    let curve = CurveSpec::straight(2, length)?;
    let omega = CrossSection::interval(1.0)?;
    let grid = TensorGrid::new(length, 24, &omega, 10)?;
    let geom = TubeGeometry::new(&curve, &grid)?;
    let eps = 0.1;
    let (_jf, op) = geom.assemble(eps, &grid)?;
    let n = 8;
    let computed = dense_eigenpairs(&op, n)?;

    let trans = cross_section::discrete_transverse_spectrum(&grid);
    let e1d = trans[0];
    let mut predicted = Vec::new();
    for i in 1..=grid.m_s {
        let alpha = cross_section::stencil_eigenvalue_1d(grid.m_s, grid.ds, i);
        for &nu in &trans {
            predicted.push(alpha + (nu - e1d) / (eps * eps));
        }
    }
    predicted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let rel = (computed.values[k] - predicted[k]).abs() / predicted[k].abs().max(1.0);
        worst = worst.max(rel);
    }
    Ok(SuiteResult {
        name: "kronecker-sum".into(),
        pass: worst <= 1e-9,
        detail: format!("lowest {n} eigenvalues, worst relative gap {worst:.3e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{load_str, Overrides};

    fn run_dir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    fn cfg_from(text: &str, out: &Path) -> RunConfig {
        let ov = Overrides {
            out_dir: Some(out.to_path_buf()),
            ..Overrides::default()
        };
        load_str(text, &ov).unwrap()
    }

    #[test]
    fn spectrum_writes_report_and_summary() {
        let dir = run_dir();
        let cfg = cfg_from(
            r#"
mode = "spectrum"
n_pairs = 2

[grid]
m_s = 60
m_t = 10

[curve]
kind = "constant"
params = { value = 0.3 }

[sweep]
epsilons = [0.1]

[output]
export_matrices = true
"#,
            dir.path(),
        );
        assert!(run(&cfg).unwrap());
        let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert!(report.lines().next().unwrap().starts_with("# mode = spectrum"));
        let data: Vec<&str> = report.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 3, "header + 2 modes");
        assert!(data[0].starts_with("n,sigma,mu,lambda,gap,residual"));
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary["rows"].as_array().unwrap().len(), 2);
        assert!(summary["min_h"].as_f64().unwrap() > 0.0);
        // lambda = sigma + eps^-2 E1
        let r0 = &summary["rows"][0];
        let shift = summary["e1_analytic"].as_f64().unwrap() / (0.1 * 0.1);
        assert!(
            (r0["lambda"].as_f64().unwrap() - r0["sigma"].as_f64().unwrap() - shift).abs() < 1e-9
        );
        assert!(dir.path().join("operator_t.coo").exists());
        assert!(dir.path().join("operator_s.coo").exists());
    }

    #[test]
    fn spectrum_is_byte_deterministic() {
        let text = r#"
mode = "spectrum"
n_pairs = 2
seed = 42

[grid]
m_s = 40
m_t = 10

[curve]
kind = "sine"
params = { amplitude = 0.5 }

[sweep]
epsilons = [0.12]
"#;
        let d1 = run_dir();
        let d2 = run_dir();
        run(&cfg_from(text, d1.path())).unwrap();
        run(&cfg_from(text, d2.path())).unwrap();
        for name in ["report.csv", "summary.json"] {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn nodal_writes_crossings_with_expected_counts() {
        let dir = run_dir();
        let cfg = cfg_from(
            r#"
mode = "nodal"
n_pairs = 3

[grid]
m_s = 80
m_t = 10

[curve]
kind = "sine"
params = { amplitude = 0.4 }

[sweep]
epsilons = [0.08]
"#,
            dir.path(),
        );
        assert!(run(&cfg).unwrap());
        // mode n has n-1 crossings per transverse line
        for n in 1..=3usize {
            let text = std::fs::read_to_string(dir.path().join(format!("nodal_{n}.csv"))).unwrap();
            let data = text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("n,")).count();
            assert_eq!(data, 10 * (n - 1), "mode {n}");
        }
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        let modes = summary["modes"].as_array().unwrap();
        assert_eq!(modes.len(), 3);
        assert_eq!(modes[1]["sign_domains"].as_u64().unwrap(), 2);
        assert!(modes[1]["max_displacement"].as_f64().unwrap() < 0.1);
    }

    #[test]
    fn sweep_pipeline_writes_rows_and_fits() {
        let dir = run_dir();
        let cfg = cfg_from(
            r#"
mode = "sweep"
n_pairs = 2

[grid]
m_s = 60
m_t = 10

[curve]
kind = "constant"
params = { value = 0.5 }

[sweep]
epsilons = [0.2, 0.14, 0.1, 0.07, 0.05]
"#,
            dir.path(),
        );
        assert!(run(&cfg).unwrap());
        let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        let data: Vec<&str> = report.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 1 + 5 * 2);
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        let fits = summary["fits"].as_array().unwrap();
        assert_eq!(fits.len(), 8, "4 metrics x 2 modes");
        let gap1 = fits
            .iter()
            .find(|f| f["metric"] == "value_gap" && f["n"] == 1)
            .unwrap();
        assert!(gap1["slope"].as_f64().unwrap() > 0.9);
    }

    #[test]
    fn validate_passes_on_defaults() {
        let dir = run_dir();
        let cfg = cfg_from("", dir.path());
        assert!(matches!(cfg.mode, Mode::Validate));
        assert!(run(&cfg).unwrap());
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary["pass"], serde_json::Value::Bool(true));
        assert_eq!(summary["suites"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn strip_spectrum_runs_end_to_end() {
        let dir = run_dir();
        let cfg = cfg_from(
            r#"
mode = "spectrum"
n_pairs = 2

[grid]
m_s = 50
m_t = 10

[surface]
length = 3.141592653589793

[surface.kappa]
kind = "constant"
params = { value = 0.2 }

[surface.gauss]
kind = "constant"
params = { value = 1.0 }

[sweep]
epsilons = [0.1]
"#,
            dir.path(),
        );
        assert!(run(&cfg).unwrap());
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary["meta"]["problem"], "strip");
        // sigma_1 ~ mu_1 = pi^2/L^2 - kappa^2/4 - K/2 with L = pi
        let mu1 = summary["rows"][0]["mu"].as_f64().unwrap();
        assert!((mu1 - (1.0 - 0.01 - 0.5)).abs() < 5e-3, "mu1 = {mu1}");
    }
}
