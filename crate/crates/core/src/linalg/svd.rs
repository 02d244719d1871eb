use std::io::{self, BufRead, Write};

use super::{LinalgError, Matrix};

/// Largest `min(rows, cols)` accepted by [`singular_values`].
pub const MAX_SVD_DIM: usize = 512;
pub const MAX_SWEEPS: usize = 30;
const OFF_TOL: f64 = 1e-12;

/// Singular values sorted non-increasing, with the shape they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum {
    values: Vec<f64>,
    source_shape: (usize, usize),
}

impl SingularSpectrum {
    /// Validates sortedness, non-negativity and length.
    pub fn new(values: Vec<f64>, source_shape: (usize, usize)) -> Result<Self, LinalgError> {
        if values.len() != source_shape.0.min(source_shape.1) {
            return Err(LinalgError::Degenerate("spectrum length must be min(rows, cols)"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(LinalgError::Degenerate("singular values must be finite and >= 0"));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(LinalgError::Degenerate("singular values must be sorted descending"));
        }
        Ok(Self { values, source_shape })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source_shape(&self) -> (usize, usize) {
        self.source_shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes `index,sigma` CSV with a header row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,sigma")?;
        for (i, s) in self.values.iter().enumerate() {
            writeln!(out, "{i},{}", crate::fmt_f64(*s))?;
        }
        Ok(())
    }

    /// Reads the values back from `index,sigma` CSV. The source shape is not
    /// stored in the file, so the caller supplies it.
    pub fn read_csv<R: BufRead>(input: R, source_shape: (usize, usize)) -> io::Result<Self> {
        let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
        let mut lines = input.lines();
        match lines.next().transpose()? {
            Some(h) if h.trim() == "index,sigma" => {}
            other => return Err(bad(format!("expected header index,sigma, got {other:?}"))),
        }
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (idx, sigma) = line
                .split_once(',')
                .ok_or_else(|| bad(format!("line {}: expected two columns", lineno + 2)))?;
            if idx.trim().parse::<usize>().ok() != Some(values.len()) {
                return Err(bad(format!("line {}: unexpected index {idx}", lineno + 2)));
            }
            let s = sigma
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 2)))?;
            values.push(s);
        }
        Self::new(values, source_shape).map_err(|e| bad(e.to_string()))
    }
}

/// Singular values by one-sided Jacobi rotations on the columns of `m`
/// (or of `mᵀ` when `m` is wide), so that `mᵀm` is never formed.
///
/// A sweep visits every column pair once. Iteration stops when the largest
/// column inner product seen in a sweep is below `1e-12 · ‖m‖_F²`.
pub fn singular_values(m: &Matrix) -> Result<SingularSpectrum, LinalgError> {
    let (rows, cols) = m.shape();
    let n = rows.min(cols);
    if n > MAX_SVD_DIM {
        return Err(LinalgError::TooLarge(n));
    }
    if !m.is_finite() {
        return Err(LinalgError::Numeric("singular_values: non-finite input".into()));
    }

    // Column-major working copy of the tall orientation.
    let tall = if rows >= cols { m.clone() } else { m.transpose() };
    let mut columns: Vec<Vec<f64>> = (0..tall.cols()).map(|c| tall.column(c)).collect();

    let tol = OFF_TOL * m.sum_squares();
    let mut converged = false;
    let mut residual = 0.0;
    for _ in 0..MAX_SWEEPS {
        residual = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                residual = residual.max(rotate_pair(&mut columns, i, j));
            }
        }
        if residual <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::Convergence {
            sweeps: MAX_SWEEPS,
            residual,
        });
    }

    let mut values: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    SingularSpectrum::new(values, (rows, cols))
}

/// Orthogonalises columns `i` and `j`; returns `|⟨c_i, c_j⟩|` before rotation.
fn rotate_pair(columns: &mut [Vec<f64>], i: usize, j: usize) -> f64 {
    let (left, right) = columns.split_at_mut(j);
    let (ci, cj) = (&mut left[i], &mut right[0]);
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for (a, b) in ci.iter().zip(cj.iter()) {
        alpha += a * a;
        beta += b * b;
        gamma += a * b;
    }
    if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
        return gamma.abs();
    }
    let zeta = (beta - alpha) / (2.0 * gamma);
    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = c * t;
    for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
    gamma.abs()
}

/// `‖m‖_* = Σ σᵢ`.
pub fn nuclear_norm(m: &Matrix) -> Result<f64, LinalgError> {
    Ok(singular_values(m)?.values.iter().sum())
}

/// `‖m‖₂ = σ_max`.
pub fn spectral_norm(m: &Matrix) -> Result<f64, LinalgError> {
    Ok(singular_values(m)?.values[0])
}

/// Exponential of the Shannon entropy of the normalised singular values.
///
/// Ranges from 1 (a single non-zero value) to the spectrum length (all
/// values equal). Zero values contribute nothing.
pub fn effective_rank(spectrum: &SingularSpectrum) -> Result<f64, LinalgError> {
    let total: f64 = spectrum.values.iter().sum();
    if total <= 0.0 {
        return Err(LinalgError::Degenerate("effective rank of an all-zero spectrum"));
    }
    let mut nonzero = spectrum.values.iter().filter(|&&s| s > 0.0);
    let first = *nonzero.clone().next().expect("positive total");
    if nonzero.all(|&s| s == first) {
        return Ok(spectrum.values.iter().filter(|&&s| s > 0.0).count() as f64);
    }
    let entropy: f64 = spectrum
        .values
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| {
            let p = s / total;
            -p * p.ln()
        })
        .sum();
    Ok(entropy.exp().clamp(1.0, spectrum.len() as f64))
}
