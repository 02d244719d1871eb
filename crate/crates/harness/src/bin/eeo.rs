use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eeo_core::diagnostics::{snapshot, DiagnosticsRecord};
use eeo_core::objective::{Objective, ParamVector};
use eeo_core::optimizer::{estimate_min_curvature, StepReport};
use eeo_core::transformer::{ModelObjective, ModelParams};
use eeo_harness::config::{RunConfig, TaskKind};
use eeo_harness::experiment::{dataset, model_shape, REPR_WINDOWS};
use eeo_harness::{checkpoint, gradcheck, lemma_check, run_experiment_in, HarnessError, Which};

#[derive(Parser)]
#[command(name = "eeo", about = "Run and check the escape-enhanced optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory, overriding `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerically check the optimizer lemmas.
    LemmaCheck {
        /// lemma2, lemma3, lemma4 or all.
        which: Which,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare analytic and finite-difference gradients of every objective.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print diagnostics for a checkpoint under a config.
    Diagnose { checkpoint: PathBuf, config: PathBuf },
    /// Print the version and random generator identifier.
    Version,
}

enum Failure {
    Check,
    Usage(HarnessError),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Usage(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, out } => {
            let mut cfg = RunConfig::parse_file(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let log = run_experiment_in(&cfg, config.parent())?;
            println!("experiment {} finished: {} steps, {} escapes", cfg.experiment, log.steps, log.escaped_count);
            println!("final loss {:.6e}", log.final_loss);
            for (name, m) in [("train", log.train), ("val", log.val), ("test", log.test)] {
                if let Some(m) = m {
                    println!("{name} mse {:.6e} mae {:.6e}", m.mse, m.mae);
                }
            }
            if let Some(b) = log.baseline_test_mse {
                println!("repeat-last baseline test mse {b:.6e}");
            }
            if let Some(flag) = log.rank_collapse {
                println!("rank collapse {}", if flag { "detected" } else { "not detected" });
            }
            println!("outputs in {}", log.out_dir.display());
            Ok(())
        }
        Command::LemmaCheck { which, seed } => {
            let report = lemma_check(which, seed);
            println!("{report}");
            if report.passed() { Ok(()) } else { Err(Failure::Check) }
        }
        Command::Gradcheck { seed } => {
            let report = gradcheck::gradcheck(seed);
            println!("{report}");
            if report.passed() { Ok(()) } else { Err(Failure::Check) }
        }
        Command::Diagnose { checkpoint, config } => diagnose(&checkpoint, &config).map_err(Failure::Usage),
        Command::Version => {
            println!("eeo {}", env!("CARGO_PKG_VERSION"));
            println!("rng {}", eeo_core::rng::GENERATOR_ID);
            Ok(())
        }
    }
}

fn diagnose(ckpt: &std::path::Path, config: &std::path::Path) -> Result<(), HarnessError> {
    let cfg = RunConfig::parse_file(config)?;
    let opt = cfg.effective_optimizer();
    let report = |obj: &dyn Objective, w: &ParamVector| -> Result<StepReport, HarnessError> {
        let loss = obj.loss_full(w);
        let g = obj.grad_full(w);
        let est = estimate_min_curvature(obj, w, &opt, &eeo_core::objective::Batch::Full, 0)?;
        println!("loss {loss:.6e}");
        println!("grad_norm {:.6e}", g.norm());
        println!("lambda_min {:.6e} ({} probes)", est.lambda, est.probes_used);
        Ok(StepReport {
            step: 0,
            loss_before: loss,
            loss_after: loss,
            grad_norm: g.norm(),
            sam_applied: false,
            escape_fired: false,
            lambda_min_est: Some(est.lambda),
            noise_norm: 0.0,
        })
    };
    match cfg.task {
        TaskKind::Landscape => {
            let land = cfg.landscape.spec(cfg.seed).build()?;
            let w = checkpoint::load(ckpt, Some(land.dim()))?;
            report(&land, &w)?;
        }
        TaskKind::Forecast | TaskKind::AttentionAlign => {
            let data = dataset(&cfg, config.parent())?;
            let shape = model_shape(&cfg, data.vars());
            let init = ModelParams::init(&shape, cfg.seed)?;
            let obj = if cfg.task == TaskKind::Forecast {
                ModelObjective::forecast(shape, data.train.clone())?
            } else {
                ModelObjective::attention_align(shape, data.train.clone(), &init, cfg.seed)?
            };
            let w = checkpoint::load(ckpt, Some(obj.dim()))?;
            let step = report(&obj, &w)?;
            let (z, a) = obj.representation(&w, REPR_WINDOWS)?;
            let rec: DiagnosticsRecord = snapshot(&step, &z, &a, false)?;
            let show = |name: &str, v: Option<f64>| {
                if let Some(v) = v {
                    println!("{name} {v:.6e}");
                }
            };
            show("erank_repr", rec.erank_repr);
            show("erank_attn", rec.erank_attn);
            show("nuclear_attn", rec.nuclear_attn);
            show("attn_entropy", rec.attn_entropy);
            if cfg.task == TaskKind::Forecast {
                for (name, ws) in [("train", &data.train), ("val", &data.val), ("test", &data.test)] {
                    if !ws.is_empty() {
                        let (mse, mae) = obj.forecast_metrics(&w, ws)?;
                        println!("{name} mse {mse:.6e} mae {mae:.6e}");
                    }
                }
            }
        }
    }
    Ok(())
}
