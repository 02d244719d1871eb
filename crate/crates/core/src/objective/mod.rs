//! Differentiable objectives and the numerical oracles used to check them.

mod fd;
mod landscape;
mod param;
mod robust;

pub use fd::{default_grad_step, default_hvp_step, fd_grad, fd_hvp, rayleigh};
pub use landscape::{Basin, Landscape, LandscapeSpec, TwoWellParams};
pub use param::ParamVector;
pub use robust::{robust_objective_estimate, RobustSampler};

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("non-finite loss when probing coordinate {coordinate}")]
    NonFiniteLoss { coordinate: usize },
    #[error("non-finite gradient at {0}")]
    NonFiniteGradient(&'static str),
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("direction norm {0:e} is too small for a finite-difference probe")]
    DegenerateDirection(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid landscape parameters: {0}")]
    Validation(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which examples a loss or gradient evaluation covers.
///
/// SAM evaluates two gradients per step; both must see the same batch.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Batch {
    #[default]
    Full,
    Subset(Arc<[usize]>),
}

/// Known regularity constants, when the objective has them.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObjectiveMeta {
    /// Gradient Lipschitz constant `L`.
    pub smoothness: Option<f64>,
    /// Hessian Lipschitz constant `ρ_H`.
    pub hessian_lipschitz: Option<f64>,
}

/// A loss with an analytic gradient.
///
/// `loss` and `grad` must be deterministic functions of `(w, batch)`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn loss(&self, w: &ParamVector, batch: &Batch) -> f64;

    fn grad(&self, w: &ParamVector, batch: &Batch) -> ParamVector;

    fn loss_and_grad(&self, w: &ParamVector, batch: &Batch) -> (f64, ParamVector) {
        (self.loss(w, batch), self.grad(w, batch))
    }

    /// Batch for optimizer step `step`. Deterministic objectives always use the full batch.
    fn sample_batch(&self, _seed: u64, _step: u64) -> Batch {
        Batch::Full
    }

    fn meta(&self) -> ObjectiveMeta {
        ObjectiveMeta::default()
    }

    fn loss_full(&self, w: &ParamVector) -> f64 {
        self.loss(w, &Batch::Full)
    }

    fn grad_full(&self, w: &ParamVector) -> ParamVector {
        self.grad(w, &Batch::Full)
    }
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn loss(&self, w: &ParamVector, batch: &Batch) -> f64 {
        (**self).loss(w, batch)
    }
    fn grad(&self, w: &ParamVector, batch: &Batch) -> ParamVector {
        (**self).grad(w, batch)
    }
    fn loss_and_grad(&self, w: &ParamVector, batch: &Batch) -> (f64, ParamVector) {
        (**self).loss_and_grad(w, batch)
    }
    fn sample_batch(&self, seed: u64, step: u64) -> Batch {
        (**self).sample_batch(seed, step)
    }
    fn meta(&self) -> ObjectiveMeta {
        (**self).meta()
    }
}
