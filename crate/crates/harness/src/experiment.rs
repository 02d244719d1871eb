//! End-to-end runs: build the objective, optimise, evaluate, write artifacts.
//!
//! A run directory holds `metrics.csv`, `spectrum_<step>.csv` files,
//! `checkpoint.bin` and `run.json`. On failure every file the run created is
//! removed again.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use eeo_core::diagnostics::{self, rank_collapse_flag, snapshot, DiagnosticsRecord};
use eeo_core::objective::{Landscape, Objective, ParamVector};
use eeo_core::optimizer::{run_with, EeoConfig, EARLY_STOP_GRAD};
use eeo_core::rng::GENERATOR_ID;
use eeo_core::transformer::{ModelObjective, ModelParams, ModelShape};

use crate::checkpoint;
use crate::config::{RunConfig, TaskKind};
use crate::data::{load_csv_windows, repeat_last_mse, sine_mixture, window_series, WindowSpec, WindowedDataset};
use crate::HarnessError;

/// Windows stacked into the representation matrix for diagnostics.
pub const REPR_WINDOWS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplitMetrics {
    pub mse: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub config_echo: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub steps: u64,
    pub escaped_count: u64,
    /// Training objective at the returned parameters.
    pub final_loss: f64,
    pub train: Option<SplitMetrics>,
    pub val: Option<SplitMetrics>,
    pub test: Option<SplitMetrics>,
    /// Repeat-last-value MSE on the test split.
    pub baseline_test_mse: Option<f64>,
    pub rank_collapse: Option<bool>,
    pub final_params: ParamVector,
    pub history: Vec<DiagnosticsRecord>,
    pub out_dir: PathBuf,
    pub checkpoint: PathBuf,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    experiment: &'a str,
    task: String,
    seed: u64,
    generator: &'a str,
    init: &'a str,
    config: &'a str,
    started_unix: u64,
    finished_unix: u64,
    steps: u64,
    escaped_count: u64,
    early_stop_grad: f64,
    final_loss: f64,
    train: Option<SplitMetrics>,
    val: Option<SplitMetrics>,
    test: Option<SplitMetrics>,
    baseline_test_mse: Option<f64>,
    rank_collapse: Option<bool>,
    metrics: &'a str,
    checkpoint: &'a str,
}

enum Built {
    Landscape(Landscape),
    Model {
        obj: ModelObjective,
        data: WindowedDataset,
    },
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Loads or generates the windowed dataset for a model task.
pub fn dataset(cfg: &RunConfig, base: Option<&Path>) -> Result<WindowedDataset, HarnessError> {
    let spec = WindowSpec::new(cfg.data.lookback, cfg.data.horizon, cfg.data.split);
    match &cfg.data.path {
        Some(p) => {
            let resolved = match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p.clone(),
            };
            load_csv_windows(&resolved, &spec)
        }
        None => window_series(&sine_mixture(cfg.data.length, cfg.data.noise, cfg.seed), &spec),
    }
}

pub fn model_shape(cfg: &RunConfig, vars: usize) -> ModelShape {
    ModelShape {
        vars,
        lookback: cfg.data.lookback,
        horizon: cfg.data.horizon,
        patch_len: cfg.patch_len(),
        d: cfg.model.d,
        d_m: cfg.model.d_m,
        d_out: cfg.model.d_out,
        layers: cfg.model.layers,
        img_patch_in: None,
    }
}

fn build(cfg: &RunConfig, base: Option<&Path>) -> Result<(Built, ParamVector), HarnessError> {
    match cfg.task {
        TaskKind::Landscape => {
            let land = cfg.landscape.spec(cfg.seed).build()?;
            let w0 = if cfg.landscape.start.is_empty() {
                ParamVector::zeros(land.dim())
            } else {
                ParamVector::new(cfg.landscape.start.clone())?
            };
            Ok((Built::Landscape(land), w0))
        }
        TaskKind::Forecast | TaskKind::AttentionAlign => {
            let data = dataset(cfg, base)?;
            let shape = model_shape(cfg, data.vars());
            let init = ModelParams::init(&shape, cfg.seed)?;
            let obj = if cfg.task == TaskKind::Forecast {
                ModelObjective::forecast(shape, data.train.clone())?
            } else {
                ModelObjective::attention_align(shape, data.train.clone(), &init, cfg.seed)?
            };
            let obj = obj.with_batch_size((cfg.data.batch_size > 0).then_some(cfg.data.batch_size));
            Ok((Built::Model { obj, data }, init.flatten()))
        }
    }
}

struct Cleanup {
    created_dir: Option<PathBuf>,
    files: Vec<PathBuf>,
    armed: bool,
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if !self.armed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if let Some(d) = &self.created_dir {
            let _ = fs::remove_dir_all(d);
        }
    }
}

/// Runs one configured experiment and writes its artifacts to `cfg.out_dir`.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunLog, HarnessError> {
    run_experiment_in(cfg, None)
}

/// As [`run_experiment`], resolving a relative `data.path` against `base`.
pub fn run_experiment_in(cfg: &RunConfig, base: Option<&Path>) -> Result<RunLog, HarnessError> {
    let ctx = |e: HarnessError| HarnessError::Experiment {
        name: cfg.experiment.clone(),
        source: Box::new(e),
    };
    let out = cfg.out_dir.clone();
    let mut cleanup = Cleanup {
        created_dir: (!out.exists()).then(|| out.clone()),
        files: Vec::new(),
        armed: true,
    };
    let log = execute(cfg, base, &mut cleanup.files).map_err(ctx)?;
    cleanup.armed = false;
    Ok(log)
}

fn execute(cfg: &RunConfig, base: Option<&Path>, written: &mut Vec<PathBuf>) -> Result<RunLog, HarnessError> {
    let started = now_unix();
    let (built, w0) = build(cfg, base)?;
    let opt: EeoConfig = cfg.effective_optimizer();

    let mut history = Vec::new();
    let mut diag_err = None;
    let output = {
        let obj: &dyn Objective = match &built {
            Built::Landscape(l) => l,
            Built::Model { obj, .. } => obj,
        };
        run_with(obj, w0, &opt, |state, report| {
            let rec = match &built {
                Built::Model { obj, .. } if report.step % cfg.diag.every == 0 && diag_err.is_none() => {
                    let full = report.step % cfg.diag.spectrum_every == 0;
                    match obj
                        .representation(&state.w, REPR_WINDOWS)
                        .map_err(HarnessError::from)
                        .and_then(|(z, a)| snapshot(report, &z, &a, full).map_err(HarnessError::from))
                    {
                        Ok(r) => r,
                        Err(e) => {
                            diag_err = Some(e);
                            DiagnosticsRecord::from_report(report)
                        }
                    }
                }
                _ => DiagnosticsRecord::from_report(report),
            };
            history.push(rec);
        })?
    };
    if let Some(e) = diag_err {
        return Err(e);
    }

    let params = if cfg.ablation.ema {
        output.final_params.clone()
    } else {
        output.final_state.w.clone()
    };

    let (final_loss, train, val, test, baseline) = match &built {
        Built::Landscape(l) => (l.loss_full(&params), None, None, None, None),
        Built::Model { obj, data } => {
            let metrics = |ws: &[eeo_core::transformer::Window]| -> Result<Option<SplitMetrics>, HarnessError> {
                if ws.is_empty() || cfg.task != TaskKind::Forecast {
                    return Ok(None);
                }
                let (mse, mae) = obj.forecast_metrics(&params, ws)?;
                Ok(Some(SplitMetrics { mse, mae }))
            };
            (
                obj.loss_full(&params),
                metrics(&data.train)?,
                metrics(&data.val)?,
                metrics(&data.test)?,
                if cfg.task == TaskKind::Forecast {
                    repeat_last_mse(&data.test)
                } else {
                    None
                },
            )
        }
    };
    if !final_loss.is_finite() {
        return Err(HarnessError::Data(format!("final loss is not finite ({final_loss})")));
    }
    let rank_collapse = if history.iter().any(|r| r.erank_repr.is_some()) {
        Some(rank_collapse_flag(&history, cfg.diag.window, cfg.diag.drop_frac)?)
    } else {
        None
    };

    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|source| HarnessError::Io {
        path: out.clone(),
        source,
    })?;
    written.push(out.join("metrics.csv"));
    written.extend(
        history
            .iter()
            .filter(|r| r.spectrum_repr.is_some())
            .map(|r| diagnostics::spectrum_path(out, r.step)),
    );
    diagnostics::export(&history, out)?;
    let ckpt = out.join("checkpoint.bin");
    written.push(ckpt.clone());
    checkpoint::save(&params, &ckpt)?;

    let finished = now_unix();
    let echo = cfg.echo();
    let meta = RunMeta {
        experiment: &cfg.experiment,
        task: cfg.task.to_string(),
        seed: cfg.seed,
        generator: GENERATOR_ID,
        init: "uniform(-1/sqrt(d), 1/sqrt(d))",
        config: &echo,
        started_unix: started,
        finished_unix: finished,
        steps: output.final_state.step,
        escaped_count: output.final_state.escaped_count,
        early_stop_grad: EARLY_STOP_GRAD,
        final_loss,
        train,
        val,
        test,
        baseline_test_mse: baseline,
        rank_collapse,
        metrics: "metrics.csv",
        checkpoint: "checkpoint.bin",
    };
    let json_path = out.join("run.json");
    written.push(json_path.clone());
    let json = serde_json::to_string_pretty(&meta).map_err(|e| HarnessError::Data(e.to_string()))?;
    fs::write(&json_path, json + "\n").map_err(|source| HarnessError::Io {
        path: json_path.clone(),
        source,
    })?;

    Ok(RunLog {
        config_echo: echo,
        started_unix: started,
        finished_unix: finished,
        steps: output.final_state.step,
        escaped_count: output.final_state.escaped_count,
        final_loss,
        train,
        val,
        test,
        baseline_test_mse: baseline,
        rank_collapse,
        final_params: params,
        history,
        out_dir: out.clone(),
        checkpoint: ckpt,
    })
}
