//! Small dense linear algebra: matrices, row softmax, norms, singular
//! values and power iteration. Everything is sized for desk-scale problems
//! (dimensions up to a few hundred).

mod matrix;
mod power;
mod svd;

pub use matrix::Matrix;
pub use power::{power_iteration, power_iteration_from, EigenPair};
pub use svd::{
    effective_rank, nuclear_norm, singular_values, spectral_norm, SingularSpectrum, MAX_SVD_DIM,
    MAX_SWEEPS,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("{op}: shape mismatch {}x{} vs {}x{}", left.0, left.1, right.0, right.1)]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("{rows}x{cols} matrix needs {} values, got {len}", rows * cols)]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("jacobi svd did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    Convergence { sweeps: usize, residual: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("dimension {0} exceeds supported maximum {MAX_SVD_DIM}")]
    TooLarge(usize),
}
