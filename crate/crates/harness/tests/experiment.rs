use std::fs;
use std::path::Path;

use eeo_core::diagnostics::{self, DiagnosticsRecord};
use eeo_core::objective::{LandscapeSpec, Objective, ParamVector};
use eeo_harness::config::{Ablation, LandscapeKind, RunConfig, TaskKind};
use eeo_harness::{checkpoint, run_experiment, HarnessError};

fn saddle(seed: u64, out: &Path) -> RunConfig {
    let text = format!(
        "experiment = saddle\ntask = landscape\nseed = {seed}\nout_dir = {}\n\
         landscape.kind = saddle\nlandscape.start = 0.001,0\n\
         optimizer.eta = 0.01\noptimizer.negcur_kick = 2\noptimizer.max_steps = 500\n",
        out.display()
    );
    RunConfig::parse_str(&text, None).unwrap()
}

fn forecast(seed: u64, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::new("forecast", TaskKind::Forecast);
    cfg.seed = seed;
    cfg.out_dir = out.to_path_buf();
    cfg.data.batch_size = 32;
    cfg.data.length = 400;
    cfg.diag.every = 5;
    cfg.diag.spectrum_every = 20;
    cfg.optimizer = cfg.optimizer.to_builder().eta(0.01).beta(0.99).max_steps(60).seed(seed).build().unwrap();
    cfg
}

#[test]
fn saddle_run_escapes() {
    let dir = tempfile::tempdir().unwrap();
    let mut good = 0;
    for seed in 0..10 {
        let log = run_experiment(&saddle(seed, &dir.path().join(seed.to_string()))).unwrap();
        if log.escaped_count >= 1 && log.final_loss < -0.5 {
            good += 1;
        }
    }
    assert!(good >= 9, "{good}/10 seeds escaped");
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = forecast(0, &out);
    let log = run_experiment(&cfg).unwrap();
    for f in ["metrics.csv", "checkpoint.bin", "run.json", "spectrum_0.csv", "spectrum_40.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert_eq!(log.history.len(), 60);
    assert_eq!(log.config_echo, cfg.echo());
    let test = log.test.unwrap();
    assert!(test.mse.is_finite() && test.mae.is_finite());

    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(json["config"].as_str().unwrap(), cfg.echo());
    assert_eq!(json["generator"].as_str().unwrap(), eeo_core::rng::GENERATOR_ID);
    assert_eq!(json["seed"].as_u64(), Some(0));

    let back = checkpoint::load(&out.join("checkpoint.bin"), Some(log.final_params.dim())).unwrap();
    assert_eq!(back, log.final_params);
    let imported = diagnostics::import_metrics(&out).unwrap();
    assert_eq!(imported.len(), 60);
    assert_eq!(imported[5].erank_repr, log.history[5].erank_repr);
}

#[test]
fn forecast_beats_repeat_last() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = forecast(1, dir.path());
    cfg.optimizer = cfg.optimizer.to_builder().max_steps(300).build().unwrap();
    cfg.diag.every = 1000;
    let log = run_experiment(&cfg).unwrap();
    let (mse, base) = (log.test.unwrap().mse, log.baseline_test_mse.unwrap());
    assert!(mse < base, "test mse {mse} vs baseline {base}");
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = forecast(3, dir.path());
    let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
    run_experiment(&cfg).unwrap();
    let first: Vec<Vec<u8>> = ["metrics.csv", "checkpoint.bin", "spectrum_20.csv"].iter().map(|f| read(f)).collect();
    run_experiment(&cfg).unwrap();
    let second: Vec<Vec<u8>> = ["metrics.csv", "checkpoint.bin", "spectrum_20.csv"].iter().map(|f| read(f)).collect();
    assert_eq!(first, second);
}

#[test]
fn no_mechanisms_is_plain_gradient_descent() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new("gd", TaskKind::Landscape);
    cfg.out_dir = dir.path().join("eeo");
    cfg.landscape.kind = LandscapeKind::Quadratic;
    cfg.landscape.diag = vec![1.0, 4.0, 9.0];
    cfg.landscape.start = vec![1.0, -0.5, 0.25];
    cfg.ablation = Ablation::NONE;
    cfg.optimizer = cfg.optimizer.to_builder().eta(0.05).max_steps(40).build().unwrap();
    run_experiment(&cfg).unwrap();

    let land = cfg.landscape.spec(0).build().unwrap();
    let mut w = ParamVector::from(cfg.landscape.start.clone());
    let mut history = Vec::new();
    for step in 0..40 {
        let g = land.grad_full(&w);
        history.push(DiagnosticsRecord {
            step,
            loss: land.loss_full(&w),
            grad_norm: g.norm(),
            lambda_min: None,
            escape_fired: false,
            erank_repr: None,
            erank_attn: None,
            nuclear_attn: None,
            attn_entropy: None,
            spectrum_repr: None,
        });
        w = w.add_scaled(-0.05, &g);
    }
    let gd_dir = dir.path().join("gd");
    fs::create_dir_all(&gd_dir).unwrap();
    diagnostics::export(&history, &gd_dir).unwrap();
    assert_eq!(
        fs::read(cfg.out_dir.join("metrics.csv")).unwrap(),
        fs::read(gd_dir.join("metrics.csv")).unwrap()
    );
    let saved = checkpoint::load(&cfg.out_dir.join("checkpoint.bin"), Some(3)).unwrap();
    assert_eq!(saved, w);
}

#[test]
fn failures_remove_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    fs::create_dir_all(out.join("checkpoint.bin")).unwrap();
    let mut cfg = saddle(0, &out);
    cfg.optimizer = cfg.optimizer.to_builder().max_steps(5).build().unwrap();
    let err = run_experiment(&cfg).unwrap_err();
    assert!(matches!(err, HarnessError::Experiment { .. }), "{err}");
    assert!(err.to_string().contains("saddle"));
    assert!(!out.join("metrics.csv").exists());
    assert!(out.is_dir());

    let fresh = dir.path().join("fresh");
    let mut cfg = forecast(0, &fresh);
    cfg.data.length = 40;
    assert!(run_experiment(&cfg).is_err());
    assert!(!fresh.exists());
}

#[test]
fn ema_off_returns_the_raw_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = saddle(0, dir.path());
    cfg.landscape.kind = LandscapeKind::Quadratic;
    cfg.landscape.start = vec![1.0, 1.0];
    cfg.optimizer = cfg.optimizer.to_builder().beta(0.9).max_steps(50).build().unwrap();
    let with_ema = run_experiment(&cfg).unwrap();
    cfg.ablation.ema = false;
    let raw = run_experiment(&cfg).unwrap();
    let land = LandscapeSpec::Quadratic {
        a: eeo_core::linalg::Matrix::from_diag(&[1.0, 10.0]),
        b: vec![0.0; 2],
    }
    .build()
    .unwrap();
    assert!(land.loss_full(&raw.final_params) < land.loss_full(&with_ema.final_params));
}
