//! The escape-explore optimizer.
//!
//! One step, in order:
//!
//! 1. draw the step's batch;
//! 2. gradient `g` at `w`;
//! 3. outer perturbation `e_w = ρ·(s(w)⊙g)/(‖s(w)⊙g‖ + ε)` and the perturbed
//!    gradient `g(w + e_w)` on the same batch;
//! 4. `w ← w − η·g(w + e_w)`;
//! 5. every `check_every` steps, estimate the smallest Hessian eigenvalue at
//!    the updated `w` and, when the gradient is small and the curvature is
//!    clearly negative, kick `w` along the eigenvector;
//! 6. add Langevin noise `√(2ηT)·ε`;
//! 7. update the moving average `m ← β·m + (1 − β)·w`;
//! 8. decay the temperature.
//!
//! [`run`] returns the moving average as the final parameters.

mod config;
mod step;

pub use config::{EeoConfig, EeoConfigBuilder, FdStep, ScalingMode};
pub use step::{
    ema_update, estimate_min_curvature, eeo_step, negcur_escape, outer_perturbation, run,
    run_with,    sam_gradient, scaling, sgld_noise, CurvatureEstimate, EeoState, RunOutput, StepReport,
    EARLY_STOP_GRAD,
};

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::objective::ObjectiveError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("parameter dimension {got} does not match objective dimension {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite gradient (‖w‖ = {w_norm:e}, ‖e_w‖ = {e_norm:e})")]
    NonFiniteGradient { w_norm: f64, e_norm: f64 },
    #[error("iterate became non-finite during {0}")]
    NonFiniteIterate(&'static str),
    #[error("step {step}: {source}")]
    Step {
        step: u64,
        #[source]
        source: Box<OptimizerError>,
    },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
