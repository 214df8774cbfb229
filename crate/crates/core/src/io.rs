//! CSV export. Every file starts with `#`-prefixed metadata lines (tool
//! version, master seed, anything else the caller adds), then a header row.
//! Absent values are written as empty fields.

use std::io::Write;

use crate::diagnostics::{ComparisonTrace, GaussianityReport, TimingRow};
use crate::minimax::MinimaxResult;
use crate::phasediag::{TransitionEstimate, TrialDataset};
use crate::solvers::IterationTrace;
use crate::state_evolution::RhoSe;
use crate::thresholds::Case;
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header comment block.
#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub seed: u64,
    pub entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(seed: u64) -> Self {
        Metadata { seed, entries: Vec::new() }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# ampcs {VERSION}")?;
        writeln!(w, "# seed: {}", self.seed)?;
        for (k, v) in &self.entries {
            writeln!(w, "# {k}: {}", v.replace('\n', " "))?;
        }
        Ok(())
    }
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

pub fn format_num(v: f64) -> String {
    format!("{v}")
}

pub fn format_opt(v: Option<f64>) -> String {
    v.map(format_num).unwrap_or_default()
}

/// Write `rows` under `header` after the metadata block.
pub fn write_table<W: Write>(mut w: W, meta: &Metadata, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    meta.write_to(&mut w).map_err(io_err)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(io_err)?;
    for row in rows {
        out.write_record(&row).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_trace<W: Write>(w: W, meta: &Metadata, trace: &IterationTrace) -> Result<()> {
    let rows = trace
        .records
        .iter()
        .map(|r| {
            vec![
                r.t.to_string(),
                format_num(r.sigma_hat),
                format_num(r.obs.mse),
                format_opt(r.obs.msenz),
                format_opt(r.obs.msez),
                format_opt(r.obs.mdr),
                format_opt(r.obs.far),
                format_num(r.residual),
            ]
        })
        .collect();
    write_table(w, meta, &["t", "sigma_hat", "mse", "msenz", "msez", "mdr", "far", "residual"], rows)
}

pub fn write_dataset<W: Write>(w: W, meta: &Metadata, data: &TrialDataset) -> Result<()> {
    let rows = data
        .records
        .iter()
        .map(|r| {
            vec![
                r.case.to_string(),
                r.algorithm.to_string(),
                r.ensemble.to_string(),
                r.amplitude.to_string(),
                format_num(r.lambda),
                r.dim.to_string(),
                r.n.to_string(),
                r.k.to_string(),
                format_num(r.delta),
                format_num(r.rho),
                r.trials.to_string(),
                r.successes.to_string(),
                r.seed.to_string(),
            ]
        })
        .collect();
    let header = ["case", "algorithm", "ensemble", "coef", "lambda", "N", "n", "k", "delta", "rho", "M", "S", "seed"];
    write_table(w, meta, &header, rows)
}

pub fn write_transitions<W: Write>(w: W, meta: &Metadata, case: Case, fits: &[TransitionEstimate]) -> Result<()> {
    let rows = fits
        .iter()
        .map(|f| {
            vec![
                case.to_string(),
                format_num(f.delta),
                format_opt(f.rho_hat),
                format_opt(f.width),
                format_opt(f.se_rho),
                f.status.to_string(),
            ]
        })
        .collect();
    write_table(w, meta, &["case", "delta", "rho_hat", "width", "se_rho", "status"], rows)
}

pub fn write_se_curve<W: Write>(w: W, meta: &Metadata, curve: &[RhoSe]) -> Result<()> {
    let rows = curve
        .iter()
        .map(|c| vec![format_num(c.delta), format_num(c.rho), format_opt(c.z_star), format_opt(c.lambda_opt)])
        .collect();
    write_table(w, meta, &["delta", "rho_se", "z_star", "lambda_opt"], rows)
}

pub fn write_minimax_curve<W: Write>(w: W, meta: &Metadata, curve: &[MinimaxResult]) -> Result<()> {
    let rows = curve.iter().map(|c| vec![format_num(c.epsilon), format_num(c.m_star), format_opt(c.z_star)]).collect();
    write_table(w, meta, &["epsilon", "m_star", "z_star"], rows)
}

/// Two columns: theoretical normal quantile, observed order statistic.
pub fn write_qq<W: Write>(w: W, meta: &Metadata, report: &GaussianityReport) -> Result<()> {
    let meta = meta
        .clone()
        .with("iteration", report.iteration)
        .with("mean", report.mean)
        .with("sd", report.sd)
        .with("ks", report.ks)
        .with("critical", report.critical)
        .with("rejected", report.rejected);
    let rows = report.qq.iter().map(|&(q, v)| vec![format_num(q), format_num(v)]).collect();
    write_table(w, &meta, &["normal_quantile", "sample"], rows)
}

pub fn write_comparison<W: Write>(w: W, meta: &Metadata, trace: &ComparisonTrace) -> Result<()> {
    let rows = trace
        .rows
        .iter()
        .map(|r| {
            let (f, e) = (&r.formal, &r.empirical);
            vec![
                r.t.to_string(),
                format_num(f.mse),
                format_num(e.mse),
                format_opt(f.msenz),
                format_opt(e.msenz),
                format_opt(f.msez),
                format_opt(e.msez),
                format_opt(f.mdr),
                format_opt(e.mdr),
                format_opt(f.far),
                format_opt(e.far),
            ]
        })
        .collect();
    let header = [
        "t",
        "mse_se",
        "mse_emp",
        "msenz_se",
        "msenz_emp",
        "msez_se",
        "msez_emp",
        "mdr_se",
        "mdr_emp",
        "far_se",
        "far_emp",
    ];
    write_table(w, meta, &header, rows)
}

pub fn write_timing<W: Write>(w: W, meta: &Metadata, rows: &[TimingRow]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.dim.to_string(),
                format_num(r.target),
                format_num(r.mean_iterations),
                format_num(r.mean_seconds),
                r.reached.to_string(),
                r.trials.to_string(),
            ]
        })
        .collect();
    write_table(w, meta, &["N", "target", "mean_iterations", "mean_seconds", "reached", "M"], rows)
}

/// Reads a file written by one of the writers above, skipping the metadata
/// block. Returns the header and the rows.
pub fn read_table<R: std::io::Read>(r: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let header = reader.headers().map_err(io_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(rec.map_err(io_err)?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}
