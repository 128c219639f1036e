//! Output tables: CSV and JSON artifacts written by the pipelines.
//!
//! Floats in CSV are printed with 17 significant digits ('.' decimal, no
//! locale) so fixtures round-trip bit-exactly. Every data row repeats the
//! grid sizes, solver tolerance, and seed, and each file opens with a
//! commented reproducibility header, so a single row pasted out of context
//! still identifies the run that produced it. All iteration is over vectors
//! in fixed order — two runs with the same config and seed produce
//! byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{ConvergenceReport, FitSummary, SweepRow};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::TensorGrid;

/// 17 significant digits: enough to reconstruct the exact f64.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Config-derived facts stamped on every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub mode: String,
    pub problem: String,
    pub length: f64,
    pub m_s: usize,
    pub m_t: usize,
    pub epsilons: Vec<f64>,
    pub n_pairs: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub solver: String,
}

impl RunMeta {
    pub fn from_config(cfg: &RunConfig) -> Self {
        RunMeta {
            mode: cfg.mode.name().to_string(),
            problem: cfg.problem.kind().to_string(),
            length: cfg.problem.length(),
            m_s: cfg.m_s,
            m_t: cfg.m_t,
            epsilons: cfg.epsilons.clone(),
            n_pairs: cfg.n_pairs,
            tolerance: cfg.tolerance,
            seed: cfg.seed,
            solver: cfg.solver.clone(),
        }
    }

    fn header_lines(&self) -> Vec<String> {
        vec![
            format!("# mode = {}, problem = {}, length = {}", self.mode, self.problem, fmt_float(self.length)),
            format!("# grid = {} x {}, solver = {}, tolerance = {}", self.m_s, self.m_t, self.solver, fmt_float(self.tolerance)),
            format!(
                "# seed = {}, n_pairs = {}, epsilons = [{}]",
                self.seed,
                self.n_pairs,
                self.epsilons.iter().map(|&e| fmt_float(e)).collect::<Vec<_>>().join(", ")
            ),
        ]
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Opens the file, writes the commented reproducibility header, and returns a
/// CSV writer positioned for the column header row.
fn csv_writer(path: &Path, meta: &RunMeta) -> Result<csv::Writer<BufWriter<File>>> {
    let mut w = create(path)?;
    for line in meta.header_lines() {
        writeln!(w, "{line}")?;
    }
    Ok(csv::Writer::from_writer(w))
}

fn finish(mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// One line of the spectrum table.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    /// 1-based mode index.
    pub n: usize,
    /// Eigenvalue of the tube operator T.
    pub sigma: f64,
    /// Eigenvalue of the 1D comparison operator S.
    pub mu: f64,
    /// Laplacian eigenvalue sigma + eps^{-2} E1.
    pub lambda: f64,
    pub gap: f64,
    pub residual: f64,
}

pub fn write_spectrum_csv(path: &Path, meta: &RunMeta, rows: &[SpectrumRow]) -> Result<()> {
    let mut w = csv_writer(path, meta)?;
    w.write_record([
        "n", "sigma", "mu", "lambda", "gap", "residual", "m_s", "m_t", "tolerance", "seed",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            fmt_float(r.sigma),
            fmt_float(r.mu),
            fmt_float(r.lambda),
            fmt_float(r.gap),
            fmt_float(r.residual),
            meta.m_s.to_string(),
            meta.m_t.to_string(),
            fmt_float(meta.tolerance),
            meta.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_sweep_csv(path: &Path, meta: &RunMeta, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path, meta)?;
    w.write_record([
        "epsilon",
        "n",
        "sigma",
        "mu",
        "lambda",
        "value_gap",
        "lambda_gap",
        "overlap",
        "sup_error",
        "weighted_error",
        "nodal_displacement",
        "flagged_lines",
        "sign_violations",
        "empirical_margin",
        "sign_domains",
        "unitarity_defect",
        "residual",
        "clustered",
        "m_s",
        "m_t",
        "tolerance",
        "seed",
        "note",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            fmt_float(r.epsilon),
            r.n.to_string(),
            fmt_float(r.sigma),
            fmt_float(r.mu),
            fmt_float(r.lambda),
            fmt_float(r.gap),
            fmt_float(r.lambda_gap),
            fmt_float(r.overlap),
            fmt_float(r.sup_error),
            fmt_float(r.weighted_error),
            fmt_float(r.nodal_disp),
            r.flagged_lines.to_string(),
            r.sign_violations.to_string(),
            fmt_float(r.empirical_margin),
            r.sign_domains.to_string(),
            fmt_float(r.unitarity_defect),
            fmt_float(r.residual),
            r.clustered.to_string(),
            r.m_s.to_string(),
            r.m_t.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("x"),
            fmt_float(meta.tolerance),
            meta.seed.to_string(),
            r.note.clone(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// One interpolated zero crossing of a mode along a transverse grid line.
#[derive(Debug, Clone)]
pub struct NodalCrossing {
    /// Flat transverse index of the line.
    pub line: usize,
    /// Transverse coordinates of the line.
    pub t: Vec<f64>,
    /// Ordinal of the crossing on its line.
    pub k: usize,
    /// Longitudinal coordinate of the crossing.
    pub s: f64,
    /// Distance to the 1D comparison mode's zero set.
    pub dist_1d: f64,
    /// Crossings found on this line (n - 1 expected).
    pub line_count: usize,
}

/// nodal_<n>.csv: every detected crossing of mode n with its distance to the
/// predicted 1D nodal set.
pub fn write_nodal_csv(path: &Path, meta: &RunMeta, n: usize, crossings: &[NodalCrossing]) -> Result<()> {
    let t_dims = crossings.first().map(|c| c.t.len()).unwrap_or(1);
    let mut w = csv_writer(path, meta)?;
    let mut header: Vec<String> = vec!["n".into(), "line".into()];
    for mu in 0..t_dims {
        header.push(format!("t{}", mu + 1));
    }
    header.extend(
        ["k", "s", "dist_1d", "line_count", "m_s", "m_t", "tolerance", "seed"]
            .map(String::from),
    );
    w.write_record(&header).map_err(csv_err)?;
    for c in crossings {
        let mut rec: Vec<String> = vec![n.to_string(), c.line.to_string()];
        rec.extend(c.t.iter().map(|&x| fmt_float(x)));
        rec.extend([
            c.k.to_string(),
            fmt_float(c.s),
            fmt_float(c.dist_1d),
            c.line_count.to_string(),
            meta.m_s.to_string(),
            meta.m_t.to_string(),
            fmt_float(meta.tolerance),
            meta.seed.to_string(),
        ]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn write_summary_json<T: Serialize>(path: &Path, summary: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, summary)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

// ---------- per-mode summaries ----------

#[derive(Debug, Serialize)]
pub struct SpectrumSummary {
    pub meta: RunMeta,
    pub epsilon: f64,
    pub e1_analytic: f64,
    pub e1_discrete: f64,
    pub spectral_floor: f64,
    pub min_h: f64,
    pub max_h: f64,
    pub rows: Vec<SpectrumRow>,
    /// Unitarity defect of each reconstructed Laplacian eigenfunction.
    pub unitarity_defects: Vec<f64>,
    /// Sign domains counted per mode (Courant predicts n).
    pub sign_domains: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub meta: RunMeta,
    pub e1_analytic: f64,
    pub simple_at_finest: bool,
    pub courant_ok_at_finest: bool,
    pub fits: Vec<FitSummary>,
    /// Rows whose eps failed outright (note says why).
    pub failed_rows: usize,
}

impl SweepSummary {
    pub fn new(meta: RunMeta, rep: &ConvergenceReport) -> Self {
        SweepSummary {
            meta,
            e1_analytic: rep.e1_analytic,
            simple_at_finest: rep.simple_at_finest,
            courant_ok_at_finest: rep.courant_ok_at_finest,
            fits: rep.fits.clone(),
            failed_rows: rep.rows.iter().filter(|r| r.sigma.is_nan()).count(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct NodalModeSummary {
    pub n: usize,
    /// Interior zeros of the 1D comparison mode.
    pub zeros_1d: Vec<f64>,
    pub max_displacement: f64,
    pub flagged_lines: usize,
    /// Smallest margin that would give zero sign violations.
    pub empirical_margin: f64,
    pub sign_domains: usize,
    pub crossings_file: String,
    /// Why this mode has no crossings file, when it doesn't.
    pub note: String,
}

#[derive(Debug, Serialize)]
pub struct NodalSummary {
    pub meta: RunMeta,
    pub epsilon: f64,
    pub modes: Vec<NodalModeSummary>,
}

#[derive(Debug, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct ValidateSummary {
    pub meta: RunMeta,
    pub suites: Vec<SuiteResult>,
    pub pass: bool,
}

/// Canonical artifact paths inside the output directory.
pub fn report_csv_path(dir: &Path) -> PathBuf {
    dir.join("report.csv")
}

pub fn summary_json_path(dir: &Path) -> PathBuf {
    dir.join("summary.json")
}

pub fn nodal_csv_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("nodal_{n}.csv"))
}

pub fn matrix_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.coo"))
}

/// Transverse coordinates of every flat transverse index, cached once per
/// grid for the nodal table.
pub fn line_coordinates(grid: &TensorGrid) -> Vec<Vec<f64>> {
    (0..grid.transverse_len()).map(|f| grid.t_coords(f)).collect()
}
