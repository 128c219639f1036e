//! Run configuration: TOML schema, defaults, command-line overrides, and the
//! validation that turns raw tables into ready-to-run problem objects.
//!
//! A config describes exactly one problem — a tube over a curve, or a strip
//! on a surface — plus grid sizes, the eps list, solver settings, and output
//! options. Unknown keys are rejected so typos surface as errors with the
//! offending field named. Every setting has a default, so all four pipelines
//! run without any config file at all (a gently bent planar tube).
//!
//! ```toml
//! mode = "sweep"                 # optional; the subcommand overrides it
//! seed = 42
//! n_pairs = 3
//! tolerance = 1e-10
//! solver = "lanczos"             # or "dense"
//!
//! [grid]
//! m_s = 200                      # interior longitudinal nodes
//! m_t = 24                       # interior nodes per transverse direction
//!
//! [curve]                        # tube problems; mutually exclusive with [surface]
//! kind = "sine"                  # curvature profile registry name
//! dim = 2
//! length = 3.141592653589793
//! # c_gamma = 1.5                # declared curvature bound (measured if absent)
//! [curve.params]
//! amplitude = 1.0
//!
//! # [[curve.higher]]             # kappa_2, ... for dim >= 3
//! # kind = "constant"
//! # [curve.higher.params]
//! # value = 0.5
//!
//! [cross_section]
//! kind = "interval"              # or "rectangle" with `sides = [w2, w3]`
//! scale = 1.0                    # interval half-width
//!
//! [sweep]
//! epsilons = [0.2, 0.1, 0.05]    # strictly decreasing; spectrum/nodal use the last
//!
//! # [surface]                    # strip problems
//! # length = 3.141592653589793
//! # kappa = { kind = "constant", params = { value = 0.3 } }
//! # gauss = { kind = "cos", params = { amplitude = 1.0 } }
//!
//! [output]
//! dir = "out"
//! export_matrices = false
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cross_section::CrossSection;
use crate::eigensolve::SOLVER_NAMES;
use crate::error::{Error, Result};
use crate::geometry::CurveSpec;
use crate::profile::build_profile;
use crate::surface::{build_gauss, SurfaceStripSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Spectrum,
    Sweep,
    Nodal,
    Validate,
}

impl Mode {
    pub fn parse(name: &str) -> Result<Mode> {
        match name {
            "spectrum" => Ok(Mode::Spectrum),
            "sweep" => Ok(Mode::Sweep),
            "nodal" => Ok(Mode::Nodal),
            "validate" => Ok(Mode::Validate),
            other => Err(Error::Config(format!(
                "unknown mode {other:?}; expected spectrum, sweep, nodal or validate"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Spectrum => "spectrum",
            Mode::Sweep => "sweep",
            Mode::Nodal => "nodal",
            Mode::Validate => "validate",
        }
    }
}

/// The geometry a run works on.
pub enum Problem {
    Tube {
        curve: CurveSpec,
        omega: CrossSection,
    },
    Strip {
        spec: SurfaceStripSpec,
    },
}

impl Problem {
    pub fn length(&self) -> f64 {
        match self {
            Problem::Tube { curve, .. } => curve.length,
            Problem::Strip { spec } => spec.length,
        }
    }

    pub fn omega(&self) -> CrossSection {
        match self {
            Problem::Tube { omega, .. } => omega.clone(),
            Problem::Strip { .. } => CrossSection::interval(1.0).expect("unit interval"),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Problem::Tube { .. } => "tube",
            Problem::Strip { .. } => "strip",
        }
    }
}

/// Fully validated run settings.
pub struct RunConfig {
    pub mode: Mode,
    pub problem: Problem,
    pub m_s: usize,
    pub m_t: usize,
    pub epsilons: Vec<f64>,
    pub n_pairs: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub solver: String,
    pub out_dir: PathBuf,
    pub export_matrices: bool,
}

impl RunConfig {
    /// The single eps used by one-eps pipelines (spectrum, nodal): the finest
    /// entry of the list.
    pub fn finest_eps(&self) -> f64 {
        *self.epsilons.last().expect("validated nonempty")
    }
}

/// Command-line overrides; every field beats the config file when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub epsilons: Option<Vec<f64>>,
    pub n_pairs: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

// ---------- raw TOML mirror ----------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<String>,
    seed: Option<u64>,
    n_pairs: Option<usize>,
    tolerance: Option<f64>,
    solver: Option<String>,
    grid: Option<RawGrid>,
    curve: Option<RawCurve>,
    cross_section: Option<RawCrossSection>,
    sweep: Option<RawSweep>,
    surface: Option<RawSurface>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    m_s: Option<usize>,
    m_t: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    kind: String,
    #[serde(default)]
    params: toml::value::Table,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurve {
    kind: String,
    #[serde(default)]
    params: toml::value::Table,
    dim: Option<usize>,
    length: Option<f64>,
    c_gamma: Option<f64>,
    #[serde(default)]
    higher: Vec<RawProfile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCrossSection {
    kind: String,
    scale: Option<f64>,
    sides: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    epsilons: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSurface {
    length: Option<f64>,
    kappa: RawProfile,
    gauss: RawProfile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    export_matrices: Option<bool>,
}

// ---------- loading ----------

const DEFAULT_LENGTH: f64 = std::f64::consts::PI;
const DEFAULT_EPSILONS: [f64; 3] = [0.2, 0.1, 0.05];

/// Loads, merges, and validates: file (optional) <- CLI overrides <- defaults.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let raw = match path {
        None => RawConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", p.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("config {}: {e}", p.display())))?
        }
    };
    resolve(raw, overrides)
}

/// Loads a config from TOML text (no file involved); used by tests.
pub fn load_str(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
    resolve(raw, overrides)
}

fn resolve(raw: RawConfig, ov: &Overrides) -> Result<RunConfig> {
    // the file's mode is validated even when a flag overrides it, so a typo
    // never hides behind the subcommand
    let file_mode = raw.mode.as_deref().map(Mode::parse).transpose()?;
    let mode = ov.mode.or(file_mode).unwrap_or(Mode::Validate);

    let m_s = raw.grid.as_ref().and_then(|g| g.m_s).unwrap_or(200);
    let m_t = raw.grid.as_ref().and_then(|g| g.m_t).unwrap_or(24);
    if m_s < 8 || m_t < 8 {
        return Err(Error::Config(format!(
            "grid sizes must be at least 8 per dimension, got m_s = {m_s}, m_t = {m_t}"
        )));
    }

    let epsilons = match (&ov.epsilons, raw.sweep) {
        (Some(list), _) => list.clone(),
        (None, Some(s)) => s.epsilons,
        (None, None) => DEFAULT_EPSILONS.to_vec(),
    };
    if epsilons.is_empty() {
        return Err(Error::Config("eps list must not be empty".into()));
    }
    if epsilons.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::Config(format!("eps values must be positive, got {epsilons:?}")));
    }
    if !epsilons.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::Config(format!(
            "eps values must be strictly decreasing, got {epsilons:?}"
        )));
    }

    let n_pairs = ov.n_pairs.or(raw.n_pairs).unwrap_or(3);
    if n_pairs == 0 {
        return Err(Error::Config("n_pairs must be at least 1".into()));
    }

    let tolerance = raw.tolerance.unwrap_or(1e-10);
    if !(tolerance > 0.0) || !tolerance.is_finite() {
        return Err(Error::Config(format!("tolerance must be positive, got {tolerance}")));
    }

    let solver = raw.solver.unwrap_or_else(|| "lanczos".to_string());
    if !SOLVER_NAMES.contains(&solver.as_str()) {
        return Err(Error::Config(format!(
            "unknown solver {solver:?}; available: {}",
            SOLVER_NAMES.join(", ")
        )));
    }

    let problem = build_problem(raw.curve, raw.cross_section, raw.surface)?;

    let out_dir = match &ov.out_dir {
        Some(d) => d.clone(),
        None => raw
            .output
            .as_ref()
            .and_then(|o| o.dir.clone())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out")),
    };
    let export_matrices = raw
        .output
        .as_ref()
        .and_then(|o| o.export_matrices)
        .unwrap_or(false);

    Ok(RunConfig {
        mode,
        problem,
        m_s,
        m_t,
        epsilons,
        n_pairs,
        tolerance,
        seed: ov.seed.or(raw.seed).unwrap_or(0),
        solver,
        out_dir,
        export_matrices,
    })
}

fn build_problem(
    curve: Option<RawCurve>,
    cross: Option<RawCrossSection>,
    surface: Option<RawSurface>,
) -> Result<Problem> {
    match (curve, surface) {
        (Some(_), Some(_)) => Err(Error::Config(
            "config declares both [curve] and [surface]; pick one problem".into(),
        )),
        (None, Some(s)) => {
            if let Some(c) = &cross {
                let ok = c.kind == "interval" && c.scale.map(|v| (v - 1.0).abs() < 1e-12).unwrap_or(true);
                if !ok {
                    return Err(Error::Config(
                        "strips fix the cross-section to the interval (-1, 1); drop [cross_section] or set kind = \"interval\", scale = 1.0".into(),
                    ));
                }
            }
            let length = s.length.unwrap_or(DEFAULT_LENGTH);
            let kappa = build_profile(&s.kappa.kind, &s.kappa.params, length)?;
            let gauss = build_gauss(&s.gauss.kind, &s.gauss.params)?;
            Ok(Problem::Strip {
                spec: SurfaceStripSpec::new(length, kappa, gauss)?,
            })
        }
        (curve, None) => {
            let raw = curve.unwrap_or(RawCurve {
                kind: "sine".into(),
                params: toml::value::Table::new(),
                dim: None,
                length: None,
                c_gamma: None,
                higher: vec![],
            });
            let dim = raw.dim.unwrap_or(2);
            let length = raw.length.unwrap_or(DEFAULT_LENGTH);
            let kappa1 = build_profile(&raw.kind, &raw.params, length)?;
            let higher = raw
                .higher
                .iter()
                .map(|p| build_profile(&p.kind, &p.params, length))
                .collect::<Result<Vec<_>>>()?;
            let curve = CurveSpec::new(dim, length, kappa1, higher, raw.c_gamma)?;
            let omega = build_cross_section(cross, dim)?;
            Ok(Problem::Tube { curve, omega })
        }
    }
}

fn build_cross_section(raw: Option<RawCrossSection>, dim: usize) -> Result<CrossSection> {
    let omega = match raw {
        None => {
            if dim == 2 {
                CrossSection::interval(1.0)?
            } else {
                CrossSection::rectangle(vec![2.0; dim - 1])?
            }
        }
        Some(c) => match c.kind.as_str() {
            "interval" => {
                if c.sides.is_some() {
                    return Err(Error::Config("interval cross-sections take `scale`, not `sides`".into()));
                }
                CrossSection::interval(c.scale.unwrap_or(1.0))?
            }
            "rectangle" => {
                let sides = c.sides.ok_or_else(|| {
                    Error::Config("rectangle cross-sections need `sides = [w2, ...]`".into())
                })?;
                let mut sides = sides;
                if let Some(scale) = c.scale {
                    if !(scale > 0.0) || !scale.is_finite() {
                        return Err(Error::Config(format!("cross-section scale must be positive, got {scale}")));
                    }
                    for s in &mut sides {
                        *s *= scale;
                    }
                }
                CrossSection::rectangle(sides)?
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown cross-section kind {other:?}; expected interval or rectangle"
                )))
            }
        },
    };
    let have = omega.dim_t() + 1;
    if have != dim {
        return Err(Error::Config(format!(
            "cross-section is {}-dimensional but the curve lives in dimension {dim}",
            have - 1
        )));
    }
    Ok(omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_a_runnable_tube() {
        let cfg = load(None, &Overrides::default()).unwrap();
        assert_eq!(cfg.mode, Mode::Validate);
        assert_eq!(cfg.problem.kind(), "tube");
        assert_eq!((cfg.m_s, cfg.m_t), (200, 24));
        assert_eq!(cfg.epsilons, vec![0.2, 0.1, 0.05]);
        assert_eq!(cfg.n_pairs, 3);
        assert_eq!(cfg.solver, "lanczos");
        assert!((cfg.finest_eps() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn full_tube_config_round_trips() {
        let text = r#"
            mode = "sweep"
            seed = 7
            n_pairs = 2
            tolerance = 1e-9
            solver = "dense"

            [grid]
            m_s = 64
            m_t = 12

            [curve]
            kind = "constant"
            dim = 3
            length = 2.0
            c_gamma = 2.0
            [curve.params]
            value = 1.0
            [[curve.higher]]
            kind = "constant"
            [curve.higher.params]
            value = 0.5

            [cross_section]
            kind = "rectangle"
            sides = [1.0, 1.5]

            [sweep]
            epsilons = [0.1, 0.05]

            [output]
            dir = "results"
            export_matrices = true
        "#;
        let cfg = load_str(text, &Overrides::default()).unwrap();
        assert_eq!(cfg.mode, Mode::Sweep);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.solver, "dense");
        assert!(cfg.export_matrices);
        assert_eq!(cfg.out_dir, PathBuf::from("results"));
        match &cfg.problem {
            Problem::Tube { curve, omega } => {
                assert_eq!(curve.dim, 3);
                assert_eq!(omega.half_extents(), vec![0.5, 0.75]);
            }
            _ => panic!("expected a tube"),
        }
    }

    #[test]
    fn surface_config_builds_a_strip() {
        let text = r#"
            mode = "spectrum"
            [surface]
            length = 3.0
            kappa = { kind = "constant", params = { value = 0.3 } }
            gauss = { kind = "cos", params = { amplitude = 1.0 } }
        "#;
        let cfg = load_str(text, &Overrides::default()).unwrap();
        assert_eq!(cfg.problem.kind(), "strip");
        assert_eq!(cfg.problem.omega().half_extents(), vec![1.0]);
    }

    #[test]
    fn overrides_beat_file_values() {
        let text = r#"
            mode = "sweep"
            seed = 1
            [sweep]
            epsilons = [0.4, 0.2]
        "#;
        let ov = Overrides {
            mode: Some(Mode::Nodal),
            seed: Some(99),
            epsilons: Some(vec![0.3, 0.15, 0.075]),
            n_pairs: Some(5),
            out_dir: Some(PathBuf::from("elsewhere")),
        };
        let cfg = load_str(text, &ov).unwrap();
        assert_eq!(cfg.mode, Mode::Nodal);
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.epsilons, vec![0.3, 0.15, 0.075]);
        assert_eq!(cfg.n_pairs, 5);
        assert_eq!(cfg.out_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn rejects_bad_inputs_with_field_names() {
        // unknown key
        let err = load_str("mod = \"sweep\"", &Overrides::default()).err().unwrap();
        assert!(err.to_string().contains("mod"), "{err}");
        // increasing eps
        let err = load_str("[sweep]\nepsilons = [0.1, 0.2]", &Overrides::default())
            .err()
            .unwrap();
        assert!(err.to_string().contains("decreasing"), "{err}");
        // tiny grid
        let err = load_str("[grid]\nm_s = 4\nm_t = 24", &Overrides::default())
            .err()
            .unwrap();
        assert!(err.to_string().contains("at least 8"), "{err}");
        // both problems at once
        let err = load_str(
            "[curve]\nkind = \"zero\"\n[surface]\nkappa = { kind = \"zero\" }\ngauss = { kind = \"constant\" }",
            &Overrides::default(),
        )
        .err()
        .unwrap();
        assert!(err.to_string().contains("pick one"), "{err}");
        // zero modes
        assert!(load_str("n_pairs = 0", &Overrides::default()).is_err());
        // solver typo
        assert!(load_str("solver = \"lanzcos\"", &Overrides::default()).is_err());
        // dimension mismatch
        let err = load_str(
            "[curve]\nkind = \"zero\"\ndim = 3\n[cross_section]\nkind = \"interval\"",
            &Overrides::default(),
        )
        .err()
        .unwrap();
        assert!(err.to_string().contains("dimension"), "{err}");
    }

    #[test]
    fn strip_rejects_non_unit_cross_sections() {
        let text = r#"
            [surface]
            kappa = { kind = "zero" }
            gauss = { kind = "constant" }
            [cross_section]
            kind = "interval"
            scale = 2.0
        "#;
        assert!(load_str(text, &Overrides::default()).is_err());
    }
}
