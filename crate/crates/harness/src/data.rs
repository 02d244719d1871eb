//! Time-series ingestion and windowing.
//!
//! The series is split chronologically into train, validation and test
//! segments before any window is cut, and every segment is z-normalised with
//! the training segment's per-variable mean and standard deviation.

use std::f64::consts::{E, SQRT_2, TAU};
use std::io::Write;
use std::path::Path;

use eeo_core::fmt_f64;
use eeo_core::linalg::Matrix;
use eeo_core::rng::{standard_normals, stream_rng, Stream};
use eeo_core::transformer::Window;

use crate::HarnessError;

/// Standard deviations below this are replaced by 1.
pub const MIN_STD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSpec {
    pub lookback: usize,
    pub horizon: usize,
    pub train_stride: usize,
    pub eval_stride: usize,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
}

impl WindowSpec {
    /// Stride 1 for training and `H` (non-overlapping targets) for evaluation.
    pub fn new(lookback: usize, horizon: usize, split: [f64; 3]) -> Self {
        Self {
            lookback,
            horizon,
            train_stride: 1,
            eval_stride: horizon,
            split,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    pub train: Vec<Window>,
    pub val: Vec<Window>,
    pub test: Vec<Window>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl WindowedDataset {
    pub fn vars(&self) -> usize {
        self.mean.len()
    }
}

/// Header names that mark the first column as a timestamp.
pub const TIME_COLUMNS: [&str; 6] = ["t", "time", "date", "datetime", "timestamp", "index"];

/// A `T×D` series read from CSV. The header row is required. The first
/// column is treated as a timestamp and skipped when its header is one of
/// [`TIME_COLUMNS`] or its first value is not numeric.
pub fn read_series(path: &Path) -> Result<Matrix, HarnessError> {
    let data_err = |msg: String| HarnessError::Data(format!("{}: {msg}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(|e| data_err(e.to_string()))?;
    let first_header = rd.headers().map_err(|e| data_err(e.to_string()))?.get(0).unwrap_or("").trim().to_lowercase();
    let time_header = TIME_COLUMNS.contains(&first_header.as_str());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut skip_first: Option<bool> = None;
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| data_err(e.to_string()))?;
        let row_no = i + 2;
        let skip = *skip_first.get_or_insert_with(|| time_header || rec.get(0).is_some_and(|c| c.trim().parse::<f64>().is_err()));
        let mut row = Vec::with_capacity(rec.len());
        for (col, cell) in rec.iter().enumerate().skip(usize::from(skip)) {
            let x: f64 = cell
                .trim()
                .parse()
                .map_err(|_| data_err(format!("row {row_no}, column {}: non-numeric value {cell:?}", col + 1)))?;
            if !x.is_finite() {
                return Err(data_err(format!("row {row_no}, column {}: non-finite value", col + 1)));
            }
            row.push(x);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(data_err(format!("row {row_no} has {} values, expected {}", row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(data_err("no numeric data".into()));
    }
    Ok(Matrix::from_rows(&rows)?)
}

/// Writes a `T×D` series as CSV with a `t` column and `x0, x1, …` headers.
pub fn write_series<W: Write>(series: &Matrix, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..series.cols()).map(|c| format!("x{c}")));
    let to_err = |e: csv::Error| HarnessError::Data(e.to_string());
    w.write_record(&header).map_err(to_err)?;
    for t in 0..series.rows() {
        let mut rec = vec![t.to_string()];
        rec.extend(series.row(t).iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| HarnessError::Data(e.to_string()))
}

/// Three noisy sine mixtures with incommensurate periods.
pub fn sine_mixture(length: usize, noise: f64, seed: u64) -> Matrix {
    const PERIODS: [[f64; 2]; 3] = [[24.0, 24.0 * 1.618_034], [17.0, 24.0 * SQRT_2], [31.0, 11.0 * E]];
    const AMPS: [[f64; 2]; 3] = [[1.0, 0.5], [0.8, 0.6], [1.2, 0.3]];
    let mut rng = stream_rng(seed, Stream::Data, 0);
    let eps = standard_normals(&mut rng, length * 3);
    Matrix::from_fn(length, 3, |t, v| {
        let t = t as f64;
        let clean: f64 = (0..2)
            .map(|k| AMPS[v][k] * (TAU * t / PERIODS[v][k] + 0.7 * (v + k) as f64).sin())
            .sum();
        clean + noise * eps[t as usize * 3 + v]
    })
}

/// Number of windows a segment of length `len` yields.
pub fn window_count(len: usize, lookback: usize, horizon: usize, stride: usize) -> usize {
    if len < lookback + horizon {
        0
    } else {
        (len - lookback - horizon) / stride + 1
    }
}

fn cut(segment: &[Vec<f64>], spec: &WindowSpec, stride: usize) -> Vec<Window> {
    let (l, h) = (spec.lookback, spec.horizon);
    let d = segment.first().map_or(0, Vec::len);
    (0..window_count(segment.len(), l, h, stride))
        .map(|i| {
            let s = i * stride;
            Window {
                input: Matrix::from_fn(d, l, |v, t| segment[s + t][v]),
                target: Matrix::from_fn(d, h, |v, t| segment[s + l + t][v]),
            }
        })
        .collect()
}

/// Splits, normalises and windows a `T×D` series. A segment with a zero
/// split fraction yields no windows; any other segment shorter than `L + H`
/// is an error.
pub fn window_series(series: &Matrix, spec: &WindowSpec) -> Result<WindowedDataset, HarnessError> {
    if spec.lookback == 0 || spec.horizon == 0 || spec.train_stride == 0 || spec.eval_stride == 0 {
        return Err(HarnessError::Data("lookback, horizon and strides must be >= 1".into()));
    }
    let t_total = series.rows();
    let n_train = (spec.split[0] * t_total as f64).floor() as usize;
    let n_val = (spec.split[1] * t_total as f64).floor() as usize;
    let bounds = [(0, n_train), (n_train, n_train + n_val), (n_train + n_val, t_total)];
    for (name, (frac, (a, b))) in ["train", "validation", "test"].iter().zip(spec.split.iter().zip(bounds)) {
        if *frac > 0.0 && b - a < spec.lookback + spec.horizon {
            return Err(HarnessError::Data(format!(
                "{name} segment has {} steps, fewer than lookback + horizon = {}",
                b - a,
                spec.lookback + spec.horizon
            )));
        }
    }

    let d = series.cols();
    let train_rows = &series.as_slice()[..n_train * d];
    let mean: Vec<f64> = (0..d)
        .map(|v| train_rows.iter().skip(v).step_by(d).sum::<f64>() / n_train as f64)
        .collect();
    let std: Vec<f64> = (0..d)
        .map(|v| {
            let var = train_rows
                .iter()
                .skip(v)
                .step_by(d)
                .map(|x| (x - mean[v]).powi(2))
                .sum::<f64>()
                / n_train as f64;
            let s = var.sqrt();
            if s < MIN_STD {
                1.0
            } else {
                s
            }
        })
        .collect();
    let normalised: Vec<Vec<f64>> = (0..t_total)
        .map(|t| (0..d).map(|v| (series[(t, v)] - mean[v]) / std[v]).collect())
        .collect();

    let seg = |(a, b): (usize, usize)| &normalised[a..b];
    Ok(WindowedDataset {
        train: cut(seg(bounds[0]), spec, spec.train_stride),
        val: cut(seg(bounds[1]), spec, spec.eval_stride),
        test: cut(seg(bounds[2]), spec, spec.eval_stride),
        mean,
        std,
    })
}

/// [`read_series`] followed by [`window_series`].
pub fn load_csv_windows(path: &Path, spec: &WindowSpec) -> Result<WindowedDataset, HarnessError> {
    window_series(&read_series(path)?, spec)
}

/// MSE of repeating each variable's last observed value over the horizon.
pub fn repeat_last_mse(windows: &[Window]) -> Option<f64> {
    let (mut se, mut n) = (0.0, 0usize);
    for w in windows {
        let last = w.input.cols() - 1;
        for v in 0..w.target.rows() {
            for t in 0..w.target.cols() {
                se += (w.target[(v, t)] - w.input[(v, last)]).powi(2);
                n += 1;
            }
        }
    }
    (n > 0).then(|| se / n as f64)
}
