//! Curvature profiles kappa(s) on [0, L], evaluable with two derivatives.
//!
//! Profiles are registered by name and built from raw TOML parameter tables,
//! so configs select them with `kind = "sine"` etc. New shapes plug in by
//! adding a row to `REGISTRY`.

use std::path::Path;

use crate::error::{Error, Result};

pub trait CurvatureProfile: Send + Sync {
    fn value(&self, s: f64) -> f64;
    fn d1(&self, s: f64) -> f64;
    fn d2(&self, s: f64) -> f64;
    fn name(&self) -> &'static str;
}

type Builder = fn(&toml::value::Table, f64) -> Result<Box<dyn CurvatureProfile>>;

/// Name -> constructor table. Builders receive the raw parameter table and the
/// curve length (profiles like `sine` are phrased relative to [0, L]).
pub static REGISTRY: &[(&str, Builder)] = &[
    ("zero", build_zero),
    ("constant", build_constant),
    ("sine", build_sine),
    ("bump", build_bump),
    ("sampled", build_sampled),
];

pub fn build_profile(
    kind: &str,
    params: &toml::value::Table,
    length: f64,
) -> Result<Box<dyn CurvatureProfile>> {
    for (name, builder) in REGISTRY {
        if *name == kind {
            return builder(params, length);
        }
    }
    let known: Vec<&str> = REGISTRY.iter().map(|(n, _)| *n).collect();
    Err(Error::Config(format!(
        "unknown curvature kind {kind:?}; known kinds: {}",
        known.join(", ")
    )))
}

pub(crate) fn get_f64(params: &toml::value::Table, key: &str) -> Result<Option<f64>> {
    match params.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_float()
            .or_else(|| v.as_integer().map(|i| i as f64))
            .map(Some)
            .ok_or_else(|| Error::Config(format!("parameter {key:?} must be a number"))),
    }
}

pub(crate) fn require_f64(params: &toml::value::Table, key: &str, default: Option<f64>) -> Result<f64> {
    match get_f64(params, key)? {
        Some(v) => Ok(v),
        None => default.ok_or_else(|| Error::Config(format!("missing parameter {key:?}"))),
    }
}

struct Constant {
    value: f64,
}

impl CurvatureProfile for Constant {
    fn value(&self, _s: f64) -> f64 {
        self.value
    }
    fn d1(&self, _s: f64) -> f64 {
        0.0
    }
    fn d2(&self, _s: f64) -> f64 {
        0.0
    }
    fn name(&self) -> &'static str {
        "constant"
    }
}

fn build_zero(_params: &toml::value::Table, _length: f64) -> Result<Box<dyn CurvatureProfile>> {
    Ok(Box::new(Constant { value: 0.0 }))
}

fn build_constant(params: &toml::value::Table, _length: f64) -> Result<Box<dyn CurvatureProfile>> {
    Ok(Box::new(Constant {
        value: require_f64(params, "value", None)?,
    }))
}

/// kappa(s) = A sin(p pi s / L); vanishes at both endpoints for integer p.
struct Sine {
    amplitude: f64,
    omega: f64,
}

impl CurvatureProfile for Sine {
    fn value(&self, s: f64) -> f64 {
        self.amplitude * (self.omega * s).sin()
    }
    fn d1(&self, s: f64) -> f64 {
        self.amplitude * self.omega * (self.omega * s).cos()
    }
    fn d2(&self, s: f64) -> f64 {
        -self.amplitude * self.omega * self.omega * (self.omega * s).sin()
    }
    fn name(&self) -> &'static str {
        "sine"
    }
}

fn build_sine(params: &toml::value::Table, length: f64) -> Result<Box<dyn CurvatureProfile>> {
    let amplitude = require_f64(params, "amplitude", Some(1.0))?;
    let periods = require_f64(params, "periods", Some(1.0))?;
    if periods <= 0.0 {
        return Err(Error::Config("sine profile needs periods > 0".into()));
    }
    Ok(Box::new(Sine {
        amplitude,
        omega: periods * std::f64::consts::PI / length,
    }))
}

/// Smooth compactly supported bump centered at `center`, peak `amplitude`,
/// support radius `width * L / 2`. C-infinity at the support edge.
struct Bump {
    amplitude: f64,
    center: f64,
    radius: f64,
}

impl Bump {
    fn x(&self, s: f64) -> f64 {
        (s - self.center) / self.radius
    }
}

impl CurvatureProfile for Bump {
    fn value(&self, s: f64) -> f64 {
        let x = self.x(s);
        if x.abs() >= 1.0 - 1e-12 {
            return 0.0;
        }
        self.amplitude * (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
    fn d1(&self, s: f64) -> f64 {
        let x = self.x(s);
        if x.abs() >= 1.0 - 1e-12 {
            return 0.0;
        }
        let u = 1.0 - x * x;
        let g1 = -2.0 * x / (u * u);
        self.value(s) * g1 / self.radius
    }
    fn d2(&self, s: f64) -> f64 {
        let x = self.x(s);
        if x.abs() >= 1.0 - 1e-12 {
            return 0.0;
        }
        let u = 1.0 - x * x;
        let g1 = -2.0 * x / (u * u);
        let g2 = -2.0 / (u * u) - 8.0 * x * x / (u * u * u);
        self.value(s) * (g1 * g1 + g2) / (self.radius * self.radius)
    }
    fn name(&self) -> &'static str {
        "bump"
    }
}

fn build_bump(params: &toml::value::Table, length: f64) -> Result<Box<dyn CurvatureProfile>> {
    let amplitude = require_f64(params, "amplitude", Some(1.0))?;
    let width = require_f64(params, "width", Some(0.5))?;
    let center = require_f64(params, "center", Some(length / 2.0))?;
    if width <= 0.0 || width > 1.0 {
        return Err(Error::Config(format!(
            "bump width must lie in (0, 1] (fraction of the length), got {width}"
        )));
    }
    Ok(Box::new(Bump {
        amplitude,
        center,
        radius: width * length / 2.0,
    }))
}

/// Natural cubic spline through sampled (s, kappa) points.
pub struct SampledProfile {
    spline: CubicSpline,
}

impl CurvatureProfile for SampledProfile {
    fn value(&self, s: f64) -> f64 {
        self.spline.value(s)
    }
    fn d1(&self, s: f64) -> f64 {
        self.spline.d1(s)
    }
    fn d2(&self, s: f64) -> f64 {
        self.spline.d2(s)
    }
    fn name(&self) -> &'static str {
        "sampled"
    }
}

impl SampledProfile {
    pub fn from_points(s: Vec<f64>, kappa: Vec<f64>, length: f64) -> Result<Self> {
        let spline = CubicSpline::natural(s, kappa)?;
        if spline.x[0] > 1e-12 || spline.x[spline.x.len() - 1] < length - 1e-12 {
            return Err(Error::Domain(format!(
                "samples cover [{:.6}, {:.6}] but the curve needs [0, {length:.6}]",
                spline.x[0],
                spline.x[spline.x.len() - 1]
            )));
        }
        Ok(SampledProfile { spline })
    }
}

fn build_sampled(params: &toml::value::Table, length: f64) -> Result<Box<dyn CurvatureProfile>> {
    if let Some(path) = params.get("csv") {
        let path = path
            .as_str()
            .ok_or_else(|| Error::Config("parameter \"csv\" must be a path string".into()))?;
        let column = require_f64(params, "column", Some(1.0))? as usize;
        let (s, k) = read_sample_csv(Path::new(path), column)?;
        return Ok(Box::new(SampledProfile::from_points(s, k, length)?));
    }
    let take_vec = |key: &str| -> Result<Vec<f64>> {
        params
            .get(key)
            .and_then(|v| v.as_array())
            .map(|arr| {
                arr.iter()
                    .map(|v| {
                        v.as_float()
                            .or_else(|| v.as_integer().map(|i| i as f64))
                            .ok_or_else(|| Error::Config(format!("{key:?} must hold numbers")))
                    })
                    .collect()
            })
            .ok_or_else(|| {
                Error::Config("sampled profile needs either \"csv\" or \"s\" and \"kappa\" arrays".into())
            })?
    };
    let s = take_vec("s")?;
    let k = take_vec("kappa")?;
    Ok(Box::new(SampledProfile::from_points(s, k, length)?))
}

/// Column 0 is the arclength; `column` selects which curvature column to read.
pub fn read_sample_csv(path: &Path, column: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut s = Vec::new();
    let mut k = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Config(format!("bad CSV record: {e}")))?;
        if record.is_empty() || record.get(0).map(|f| f.is_empty()) == Some(true) {
            continue;
        }
        let parse = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::Config(format!("CSV row lacks column {idx}")))?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad float in CSV: {e}")))
        };
        // header rows with non-numeric fields are skipped
        match (parse(0), parse(column)) {
            (Ok(a), Ok(b)) => {
                s.push(a);
                k.push(b);
            }
            _ if s.is_empty() => continue,
            (a, b) => {
                a?;
                b?;
            }
        }
    }
    Ok((s, k))
}

/// Natural cubic spline: C^2 interpolant with zero second derivative at the ends.
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::Degenerate(format!(
                "sample arrays disagree in length: {n} vs {}",
                y.len()
            )));
        }
        if n < 4 {
            return Err(Error::Degenerate(format!(
                "need at least 4 sample points for a C^2 spline, got {n}"
            )));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Degenerate("sample abscissae must be strictly increasing".into()));
        }
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 1..n - 1 {
            let hl = x[i] - x[i - 1];
            let hr = x[i + 1] - x[i];
            diag[i] = 2.0 * (hl + hr);
            upper[i] = hr;
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl);
        }
        let mut m = vec![0.0; n];
        for i in 2..n - 1 {
            let hl = x[i] - x[i - 1];
            let w = hl / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (1..n - 1).rev() {
            m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
        }
        Ok(CubicSpline { x, y, m })
    }

    fn segment(&self, s: f64) -> usize {
        // clamp to the covered range; evaluation beyond it extends the end segments
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        let i = self.segment(s);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - s) / h;
        let b = (s - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn d1(&self, s: f64) -> f64 {
        let i = self.segment(s);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - s) / h;
        let b = (s - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((3.0 * b * b - 1.0) * self.m[i + 1] - (3.0 * a * a - 1.0) * self.m[i]) * h / 6.0
    }

    pub fn d2(&self, s: f64) -> f64 {
        let i = self.segment(s);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - s) / h;
        let b = (s - self.x[i]) / h;
        a * self.m[i] + b * self.m[i + 1]
    }
}
