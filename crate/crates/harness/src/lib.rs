//! Experiment harness around `eeo-core`: key/value run configs, CSV series
//! loading and windowing, checkpoints, numerical lemma checks and the `eeo`
//! command-line tool.

use std::path::PathBuf;

use eeo_core::diagnostics::DiagnosticsError;
use eeo_core::linalg::LinalgError;
use eeo_core::objective::ObjectiveError;
use eeo_core::optimizer::OptimizerError;
use eeo_core::transformer::TransformerError;

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod experiment;
pub mod gradcheck;
pub mod lemmas;

pub use config::RunConfig;
pub use experiment::{run_experiment, run_experiment_in, RunLog};
pub use lemmas::{lemma_check, LemmaReport, Which};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{}", match line { Some(l) => format!("config line {l}: {msg}"), None => format!("config: {msg}") })]
    Config { line: Option<usize>, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("data: {0}")]
    Data(String),
    #[error("checkpoint {0}")]
    Checkpoint(String),
    #[error("experiment {name:?} failed: {source}")]
    Experiment {
        name: String,
        #[source]
        source: Box<HarnessError>,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Transformer(#[from] TransformerError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

impl HarnessError {
    pub fn config(line: usize, msg: impl Into<String>) -> Self {
        HarnessError::Config {
            line: Some(line),
            msg: msg.into(),
        }
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/harness.md")]
mod book {}
