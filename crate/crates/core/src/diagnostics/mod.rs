//! Rank and entropy collapse instrumentation.
//!
//! `metrics.csv` has exactly the columns
//! `step,loss,grad_norm,lambda_min,escape_fired,erank_repr,erank_attn,nuclear_attn,attn_entropy`.
//! Missing values are empty fields and `escape_fired` is `0` or `1`.
//! Captured spectra go to `spectrum_<step>.csv` with columns `index,sigma`.

use std::fs::{self, File};
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fmt_f64;
use crate::linalg::{effective_rank, singular_values, LinalgError, Matrix, SingularSpectrum};
use crate::optimizer::StepReport;

pub const METRICS_HEADER: [&str; 9] = [
    "step",
    "loss",
    "grad_norm",
    "lambda_min",
    "escape_fired",
    "erank_repr",
    "erank_attn",
    "nuclear_attn",
    "attn_entropy",
];

/// Rows of an attention matrix must sum to one within this.
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}, line {line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },
}

/// One row of `metrics.csv`.
///
/// The model fields are absent for objectives without a representation
/// (analytic landscapes) and on steps between snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub loss: f64,
    pub grad_norm: f64,
    pub lambda_min: Option<f64>,
    pub escape_fired: bool,
    pub erank_repr: Option<f64>,
    pub erank_attn: Option<f64>,
    pub nuclear_attn: Option<f64>,
    pub attn_entropy: Option<f64>,
    pub spectrum_repr: Option<SingularSpectrum>,
}

impl DiagnosticsRecord {
    /// Optimizer-only fields; the model fields are left empty.
    pub fn from_report(report: &StepReport) -> Self {
        Self {
            step: report.step,
            loss: report.loss_before,
            grad_norm: report.grad_norm,
            lambda_min: report.lambda_min_est,
            escape_fired: report.escape_fired,
            erank_repr: None,
            erank_attn: None,
            nuclear_attn: None,
            attn_entropy: None,
            spectrum_repr: None,
        }
    }
}

/// Mean row entropy `−Σ_j A_ij ln A_ij` (natural log, `0·ln 0 = 0`).
pub fn attention_entropy(a: &Matrix) -> Result<f64, DiagnosticsError> {
    let mut total = 0.0;
    for r in 0..a.rows() {
        let row = a.row(r);
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL || row.iter().any(|&p| p < -STOCHASTIC_TOL) {
            return Err(DiagnosticsError::Validation(format!(
                "attention row {r} is not a probability vector (sum {sum})"
            )));
        }
        total -= row.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
    }
    Ok(total / a.rows() as f64)
}

/// Full diagnostics for one step. The representation spectrum is kept only
/// when `full_spectrum` is set.
pub fn snapshot(
    report: &StepReport,
    z_repr: &Matrix,
    a: &Matrix,
    full_spectrum: bool,
) -> Result<DiagnosticsRecord, DiagnosticsError> {
    let repr = singular_values(z_repr)?;
    let attn = singular_values(a)?;
    let mut rec = DiagnosticsRecord::from_report(report);
    rec.erank_repr = Some(effective_rank(&repr)?);
    rec.erank_attn = Some(effective_rank(&attn)?);
    rec.nuclear_attn = Some(attn.values().iter().sum());
    rec.attn_entropy = Some(attention_entropy(a)?);
    rec.spectrum_repr = full_spectrum.then_some(repr);
    Ok(rec)
}

/// True when the smallest representation effective rank over the trailing
/// `window` records is below `drop_frac` times the largest over the whole
/// history. Records without a representation rank are ignored.
pub fn rank_collapse_flag(history: &[DiagnosticsRecord], window: usize, drop_frac: f64) -> Result<bool, DiagnosticsError> {
    if window == 0 || !(drop_frac > 0.0 && drop_frac < 1.0) {
        return Err(DiagnosticsError::Validation(format!(
            "need window >= 1 and 0 < drop_frac < 1 (window={window}, drop_frac={drop_frac})"
        )));
    }
    let ranks: Vec<f64> = history.iter().filter_map(|r| r.erank_repr).collect();
    if ranks.is_empty() {
        return Err(DiagnosticsError::Validation("no representation ranks in history".into()));
    }
    let peak = ranks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let recent = ranks[ranks.len().saturating_sub(window)..]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(recent < drop_frac * peak)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DiagnosticsError + '_ {
    move |source| DiagnosticsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> DiagnosticsError + '_ {
    move |source| DiagnosticsError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn spectrum_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("spectrum_{step}.csv"))
}

/// Writes `metrics.csv` and one spectrum file per record that carries one.
pub fn export(history: &[DiagnosticsRecord], dir: &Path) -> Result<(), DiagnosticsError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(METRICS_HEADER).map_err(csv_err(&path))?;
    for r in history {
        w.write_record([
            r.step.to_string(),
            fmt_f64(r.loss),
            fmt_f64(r.grad_norm),
            opt(r.lambda_min),
            u8::from(r.escape_fired).to_string(),
            opt(r.erank_repr),
            opt(r.erank_attn),
            opt(r.nuclear_attn),
            opt(r.attn_entropy),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    for r in history {
        if let Some(s) = &r.spectrum_repr {
            let sp = spectrum_path(dir, r.step);
            let f = File::create(&sp).map_err(io_err(&sp))?;
            s.write_csv(io::BufWriter::new(f)).map_err(io_err(&sp))?;
        }
    }
    Ok(())
}

/// Reads `metrics.csv` back. Spectra are not attached; see [`import_spectrum`].
pub fn import_metrics(dir: &Path) -> Result<Vec<DiagnosticsRecord>, DiagnosticsError> {
    let path = dir.join("metrics.csv");
    let mut rd = csv::Reader::from_path(&path).map_err(csv_err(&path))?;
    let header = rd.headers().map_err(csv_err(&path))?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(DiagnosticsError::Parse {
            path,
            line: 1,
            msg: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err(&path))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: String| DiagnosticsError::Parse {
            path: path.clone(),
            line,
            msg,
        };
        let num = |i: usize| -> Result<f64, DiagnosticsError> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("column {}: {e}", METRICS_HEADER[i])))
        };
        let maybe = |i: usize| -> Result<Option<f64>, DiagnosticsError> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        out.push(DiagnosticsRecord {
            step: rec[0].parse().map_err(|e| bad(format!("column step: {e}")))?,
            loss: num(1)?,
            grad_norm: num(2)?,
            lambda_min: maybe(3)?,
            escape_fired: match &rec[4] {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("escape_fired must be 0 or 1, got {other:?}"))),
            },
            erank_repr: maybe(5)?,
            erank_attn: maybe(6)?,
            nuclear_attn: maybe(7)?,
            attn_entropy: maybe(8)?,
            spectrum_repr: None,
        });
    }
    Ok(out)
}

/// Reads `spectrum_<step>.csv`; `source_shape` is the shape of the matrix
/// the spectrum was taken from.
pub fn import_spectrum(dir: &Path, step: u64, source_shape: (usize, usize)) -> Result<SingularSpectrum, DiagnosticsError> {
    let path = spectrum_path(dir, step);
    let f = File::open(&path).map_err(io_err(&path))?;
    SingularSpectrum::read_csv(BufReader::new(f), source_shape).map_err(io_err(&path))
}
