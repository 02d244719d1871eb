//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! experiment = saddle-demo
//! task = landscape
//! landscape.kind = saddle
//! optimizer.eta = 0.01
//! ```
//!
//! Keys are dotted; unknown keys, malformed values and out-of-range values
//! are errors that carry the line number. Every key except `experiment` and
//! `task` has a default, and [`RunConfig::echo`] prints all of them in a
//! fixed order. Lists are comma-separated.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use eeo_core::fmt_f64;
use eeo_core::linalg::Matrix;
use eeo_core::objective::{LandscapeSpec, TwoWellParams};
use eeo_core::optimizer::{EeoConfig, EeoConfigBuilder, FdStep, ScalingMode};

use crate::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Landscape,
    Forecast,
    AttentionAlign,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Landscape => "landscape",
            Self::Forecast => "forecast",
            Self::AttentionAlign => "attention_align",
        })
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "landscape" => Ok(Self::Landscape),
            "forecast" => Ok(Self::Forecast),
            "attention_align" => Ok(Self::AttentionAlign),
            _ => Err(format!("unknown task {s:?} (expected landscape, forecast or attention_align)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LandscapeKind {
    Quadratic,
    Saddle,
    Cubic,
    TwoWell,
    ToyLinear,
}

impl fmt::Display for LandscapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Quadratic => "quadratic",
            Self::Saddle => "saddle",
            Self::Cubic => "cubic",
            Self::TwoWell => "two_well",
            Self::ToyLinear => "toy_linear",
        })
    }
}

impl FromStr for LandscapeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quadratic" => Ok(Self::Quadratic),
            "saddle" => Ok(Self::Saddle),
            "cubic" => Ok(Self::Cubic),
            "two_well" => Ok(Self::TwoWell),
            "toy_linear" => Ok(Self::ToyLinear),
            _ => Err(format!(
                "unknown landscape {s:?} (expected quadratic, saddle, cubic, two_well or toy_linear)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LandscapeConfig {
    pub kind: LandscapeKind,
    /// Diagonal of `A` for the quadratic (`b = 0`).
    pub diag: Vec<f64>,
    /// Dimension of the cubic.
    pub dim: usize,
    pub two_well: TwoWellParams,
    pub n: usize,
    pub lookback: usize,
    pub horizon: usize,
    pub sigma: f64,
    /// Starting point; empty means the origin.
    pub start: Vec<f64>,
}

impl LandscapeConfig {
    pub fn spec(&self, seed: u64) -> LandscapeSpec {
        match self.kind {
            LandscapeKind::Quadratic => LandscapeSpec::Quadratic {
                a: Matrix::from_diag(&self.diag),
                b: vec![0.0; self.diag.len()],
            },
            LandscapeKind::Saddle => LandscapeSpec::Saddle,
            LandscapeKind::Cubic => LandscapeSpec::Cubic { dim: self.dim },
            LandscapeKind::TwoWell => LandscapeSpec::TwoWell(self.two_well),
            LandscapeKind::ToyLinear => LandscapeSpec::ToyLinear {
                n: self.n,
                lookback: self.lookback,
                horizon: self.horizon,
                sigma: self.sigma,
                seed,
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            LandscapeKind::Quadratic => self.diag.len(),
            LandscapeKind::Saddle => 2,
            LandscapeKind::Cubic => self.dim,
            LandscapeKind::TwoWell => 1,
            LandscapeKind::ToyLinear => self.lookback * self.horizon,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    /// CSV file; `None` uses the bundled sine-mixture generator.
    pub path: Option<PathBuf>,
    pub lookback: usize,
    pub horizon: usize,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    /// Length of the generated series.
    pub length: usize,
    /// Noise standard deviation of the generated series.
    pub noise: f64,
    /// Windows per step; 0 uses every training window.
    pub batch_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub d: usize,
    pub d_m: usize,
    pub d_out: usize,
    /// 0 means one token per variable (`patch_len = lookback`).
    pub patch_len: usize,
    pub layers: usize,
}

/// Which optimizer mechanisms are enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ablation {
    pub sam: bool,
    pub escape: bool,
    pub sgld: bool,
    pub ema: bool,
}

impl Ablation {
    pub const FULL: Self = Self {
        sam: true,
        escape: true,
        sgld: true,
        ema: true,
    };
    pub const NONE: Self = Self {
        sam: false,
        escape: false,
        sgld: false,
        ema: false,
    };

    /// Disables mechanisms: no SAM sets `ρ = 0`, no escape sets
    /// `negcur_kick = 0`, no SGLD sets `T = 0`, no EMA sets `β = 0`.
    pub fn apply(&self, cfg: &EeoConfig) -> EeoConfig {
        let mut b = cfg.to_builder();
        if !self.sam {
            b = b.rho(0.0);
        }
        if !self.escape {
            b = b.negcur_kick(0.0);
        }
        if !self.sgld {
            b = b.temperature(0.0);
        }
        if !self.ema {
            b = b.beta(0.0);
        }
        b.build().expect("disabling mechanisms keeps a valid config")
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on: Vec<&str> = [
            (self.sam, "sam"),
            (self.escape, "escape"),
            (self.sgld, "sgld"),
            (self.ema, "ema"),
        ]
        .iter()
        .filter(|(b, _)| *b)
        .map(|(_, n)| *n)
        .collect();
        if on.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&on.join(","))
        }
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut a = Self::NONE;
        if s == "none" {
            return Ok(a);
        }
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "sam" => a.sam = true,
                "escape" => a.escape = true,
                "sgld" => a.sgld = true,
                "ema" => a.ema = true,
                other => return Err(format!("unknown mechanism {other:?} (expected sam, escape, sgld, ema)")),
            }
        }
        Ok(a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagConfig {
    /// Model snapshot every this many steps.
    pub every: u64,
    /// Keep the representation spectrum every this many steps.
    pub spectrum_every: u64,
    pub window: usize,
    pub drop_frac: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: String,
    pub task: TaskKind,
    /// Seeds the optimizer, the data generator and the initialisation.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub landscape: LandscapeConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    /// Optimizer settings; the seed is taken from [`RunConfig::seed`].
    pub optimizer: EeoConfig,
    pub ablation: Ablation,
    pub diag: DiagConfig,
}

const OPTIMIZER_KEYS: [&str; 14] = [
    "optimizer.eta",
    "optimizer.rho",
    "optimizer.eps",
    "optimizer.scaling_mode",
    "optimizer.alpha_fd",
    "optimizer.negcur_kick",
    "optimizer.grad_trigger",
    "optimizer.curvature_threshold",
    "optimizer.probe_iters",
    "optimizer.check_every",
    "optimizer.temperature",
    "optimizer.temp_decay",
    "optimizer.beta",
    "optimizer.max_steps",
];

/// Every accepted key, in echo order.
pub const KEYS: [&str; 46] = [
    "experiment",
    "task",
    "seed",
    "out_dir",
    "landscape.kind",
    "landscape.diag",
    "landscape.dim",
    "landscape.bowl",
    "landscape.depth",
    "landscape.width",
    "landscape.n",
    "landscape.lookback",
    "landscape.horizon",
    "landscape.sigma",
    "landscape.start",
    "data.path",
    "data.lookback",
    "data.horizon",
    "data.split",
    "data.length",
    "data.noise",
    "data.batch_size",
    "model.d",
    "model.d_m",
    "model.d_out",
    "model.patch_len",
    "model.layers",
    OPTIMIZER_KEYS[0],
    OPTIMIZER_KEYS[1],
    OPTIMIZER_KEYS[2],
    OPTIMIZER_KEYS[3],
    OPTIMIZER_KEYS[4],
    OPTIMIZER_KEYS[5],
    OPTIMIZER_KEYS[6],
    OPTIMIZER_KEYS[7],
    OPTIMIZER_KEYS[8],
    OPTIMIZER_KEYS[9],
    OPTIMIZER_KEYS[10],
    OPTIMIZER_KEYS[11],
    OPTIMIZER_KEYS[12],
    OPTIMIZER_KEYS[13],
    "ablation",
    "diag.every",
    "diag.spectrum_every",
    "diag.window",
    "diag.drop_frac",
];

fn all_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().copied()
}

fn num<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("cannot parse {v:?}: {e}"))
}

fn finite(v: &str) -> Result<f64, String> {
    let x: f64 = num(v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{v:?} is not finite"))
    }
}

fn positive_count(v: &str) -> Result<usize, String> {
    match num::<usize>(v)? {
        0 => Err("must be >= 1".into()),
        n => Ok(n),
    }
}

fn float_list(v: &str) -> Result<Vec<f64>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| finite(p.trim())).collect()
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    fn defaults(experiment: String, task: TaskKind) -> Self {
        let two_well = TwoWellParams::default();
        Self {
            out_dir: PathBuf::from("runs").join(&experiment),
            experiment,
            task,
            seed: 0,
            landscape: LandscapeConfig {
                kind: LandscapeKind::Saddle,
                diag: vec![1.0, 10.0],
                dim: 2,
                two_well,
                n: 64,
                lookback: 8,
                horizon: 2,
                sigma: 0.1,
                start: Vec::new(),
            },
            data: DataConfig {
                path: None,
                lookback: 24,
                horizon: 4,
                split: [0.7, 0.1, 0.2],
                length: 720,
                noise: 0.1,
                batch_size: 0,
            },
            model: ModelConfig {
                d: 8,
                d_m: 8,
                d_out: 8,
                patch_len: 0,
                layers: 1,
            },
            optimizer: EeoConfig::default(),
            ablation: Ablation::FULL,
            diag: DiagConfig {
                every: 10,
                spectrum_every: 50,
                window: 20,
                drop_frac: 0.5,
            },
        }
    }

    /// A configuration with every default and the given required keys.
    pub fn new(experiment: impl Into<String>, task: TaskKind) -> Self {
        Self::defaults(experiment.into(), task)
    }

    pub fn parse_file(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text, path.parent())
    }

    /// Parses configuration text. Relative `data.path` values are resolved
    /// against `base` when given.
    pub fn parse_str(text: &str, base: Option<&Path>) -> Result<Self, HarnessError> {
        let mut entries: BTreeMap<&str, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(HarnessError::config(line, format!("expected `key = value`, got {content:?}")));
            };
            let (k, v) = (k.trim(), v.trim());
            let Some(key) = all_keys().find(|known| *known == k) else {
                return Err(HarnessError::config(line, format!("unknown key {k:?}")));
            };
            if let Some((prev, _)) = entries.insert(key, (line, v.to_string())) {
                return Err(HarnessError::config(line, format!("duplicate key {k:?} (first set on line {prev})")));
            }
        }

        let missing: Vec<&str> = ["experiment", "task"]
            .into_iter()
            .filter(|k| !entries.contains_key(k))
            .collect();
        if !missing.is_empty() {
            return Err(HarnessError::Config {
                line: None,
                msg: format!("missing required keys: {}", missing.join(", ")),
            });
        }

        let (exp_line, experiment) = entries["experiment"].clone();
        if experiment.is_empty() {
            return Err(HarnessError::config(exp_line, "experiment must not be empty"));
        }
        let (task_line, task) = &entries["task"];
        let task = task.parse().map_err(|e| HarnessError::config(*task_line, e))?;
        let mut cfg = Self::defaults(experiment, task);

        let mut opt = EeoConfig::default().to_builder();
        for (key, (line, value)) in &entries {
            let at = |msg: String| HarnessError::config(*line, format!("{key}: {msg}"));
            if let Some(name) = key.strip_prefix("optimizer.") {
                opt = set_optimizer(opt.clone(), name, value).map_err(&at)?;
                set_optimizer(EeoConfig::builder(), name, value)
                    .map_err(&at)?
                    .build()
                    .map_err(|e| at(e.to_string()))?;
            } else {
                cfg.set(key, value, base).map_err(at)?;
            }
        }
        cfg.optimizer = opt
            .seed(cfg.seed)
            .build()
            .map_err(|e| HarnessError::Config { line: None, msg: e.to_string() })?;

        let line_of = |k: &str| entries.get(k).map(|(l, _)| *l);
        cfg.check_consistency().map_err(|(key, msg)| HarnessError::Config {
            line: line_of(key),
            msg: format!("{key}: {msg}"),
        })?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str, base: Option<&Path>) -> Result<(), String> {
        let l = &mut self.landscape;
        let d = &mut self.data;
        let m = &mut self.model;
        match key {
            "experiment" | "task" => {}
            "seed" => self.seed = num(v)?,
            "out_dir" => {
                if v.is_empty() {
                    return Err("must not be empty".into());
                }
                self.out_dir = PathBuf::from(v)
            }
            "landscape.kind" => l.kind = v.parse()?,
            "landscape.diag" => l.diag = float_list(v)?,
            "landscape.dim" => l.dim = positive_count(v)?,
            "landscape.bowl" => l.two_well.bowl = finite(v)?,
            "landscape.depth" => l.two_well.depth = finite(v)?,
            "landscape.width" => l.two_well.width = finite(v)?,
            "landscape.n" => l.n = positive_count(v)?,
            "landscape.lookback" => l.lookback = positive_count(v)?,
            "landscape.horizon" => l.horizon = positive_count(v)?,
            "landscape.sigma" => {
                l.sigma = finite(v)?;
                if l.sigma < 0.0 {
                    return Err("must be >= 0".into());
                }
            }
            "landscape.start" => l.start = float_list(v)?,
            "data.path" => {
                if v.is_empty() {
                    d.path = None;
                } else {
                    let p = PathBuf::from(v);
                    let resolved = match base {
                        Some(b) if p.is_relative() => b.join(&p),
                        _ => p.clone(),
                    };
                    if !resolved.is_file() {
                        return Err(format!("data file {} does not exist", resolved.display()));
                    }
                    d.path = Some(p);
                }
            }
            "data.lookback" => d.lookback = positive_count(v)?,
            "data.horizon" => d.horizon = positive_count(v)?,
            "data.split" => {
                let s = float_list(v)?;
                let [a, b, c] = s[..] else {
                    return Err(format!("expected three fractions, got {}", s.len()));
                };
                if a <= 0.0 || b < 0.0 || c < 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
                    return Err(format!("fractions must be non-negative, train > 0, and sum to 1 (got {v})"));
                }
                d.split = [a, b, c];
            }
            "data.length" => d.length = positive_count(v)?,
            "data.noise" => {
                d.noise = finite(v)?;
                if d.noise < 0.0 {
                    return Err("must be >= 0".into());
                }
            }
            "data.batch_size" => d.batch_size = num(v)?,
            "model.d" => m.d = positive_count(v)?,
            "model.d_m" => m.d_m = positive_count(v)?,
            "model.d_out" => m.d_out = positive_count(v)?,
            "model.patch_len" => m.patch_len = num(v)?,
            "model.layers" => {
                m.layers = num(v)?;
                if !(1..=4).contains(&m.layers) {
                    return Err("must be in 1..=4".into());
                }
            }
            "ablation" => self.ablation = v.parse()?,
            "diag.every" => self.diag.every = positive_count(v)? as u64,
            "diag.spectrum_every" => self.diag.spectrum_every = positive_count(v)? as u64,
            "diag.window" => self.diag.window = positive_count(v)?,
            "diag.drop_frac" => {
                self.diag.drop_frac = finite(v)?;
                if !(self.diag.drop_frac > 0.0 && self.diag.drop_frac < 1.0) {
                    return Err("must be in (0, 1)".into());
                }
            }
            other => unreachable!("key {other} is in KEYS but not handled"),
        }
        Ok(())
    }

    /// Cross-key checks; returns the key to blame.
    fn check_consistency(&self) -> Result<(), (&'static str, String)> {
        let l = &self.landscape;
        if self.task == TaskKind::Landscape {
            if l.kind == LandscapeKind::Quadratic && l.diag.is_empty() {
                return Err(("landscape.diag", "quadratic needs a non-empty diagonal".into()));
            }
            if !l.start.is_empty() && l.start.len() != l.dim() {
                return Err((
                    "landscape.start",
                    format!("has {} entries, the {} landscape has dimension {}", l.start.len(), l.kind, l.dim()),
                ));
            }
            let spec = l.spec(self.seed);
            spec.build().map_err(|e| ("landscape.kind", e.to_string()))?;
        } else {
            let patch = self.patch_len();
            if !self.data.lookback.is_multiple_of(patch) {
                return Err((
                    "model.patch_len",
                    format!("lookback {} is not a multiple of patch_len {patch}", self.data.lookback),
                ));
            }
        }
        Ok(())
    }

    pub fn patch_len(&self) -> usize {
        if self.model.patch_len == 0 {
            self.data.lookback
        } else {
            self.model.patch_len
        }
    }

    /// The optimizer configuration with the ablation applied.
    pub fn effective_optimizer(&self) -> EeoConfig {
        self.ablation.apply(&self.optimizer)
    }

    fn value(&self, key: &str) -> String {
        let l = &self.landscape;
        let d = &self.data;
        let m = &self.model;
        let o = &self.optimizer;
        match key {
            "experiment" => self.experiment.clone(),
            "task" => self.task.to_string(),
            "seed" => self.seed.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            "landscape.kind" => l.kind.to_string(),
            "landscape.diag" => fmt_list(&l.diag),
            "landscape.dim" => l.dim.to_string(),
            "landscape.bowl" => fmt_f64(l.two_well.bowl),
            "landscape.depth" => fmt_f64(l.two_well.depth),
            "landscape.width" => fmt_f64(l.two_well.width),
            "landscape.n" => l.n.to_string(),
            "landscape.lookback" => l.lookback.to_string(),
            "landscape.horizon" => l.horizon.to_string(),
            "landscape.sigma" => fmt_f64(l.sigma),
            "landscape.start" => fmt_list(&l.start),
            "data.path" => d.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            "data.lookback" => d.lookback.to_string(),
            "data.horizon" => d.horizon.to_string(),
            "data.split" => fmt_list(&d.split),
            "data.length" => d.length.to_string(),
            "data.noise" => fmt_f64(d.noise),
            "data.batch_size" => d.batch_size.to_string(),
            "model.d" => m.d.to_string(),
            "model.d_m" => m.d_m.to_string(),
            "model.d_out" => m.d_out.to_string(),
            "model.patch_len" => m.patch_len.to_string(),
            "model.layers" => m.layers.to_string(),
            "optimizer.eta" => fmt_f64(o.eta()),
            "optimizer.rho" => fmt_f64(o.rho()),
            "optimizer.eps" => fmt_f64(o.eps()),
            "optimizer.scaling_mode" => o.scaling_mode().to_string(),
            "optimizer.alpha_fd" => o.alpha_fd().to_string(),
            "optimizer.negcur_kick" => fmt_f64(o.negcur_kick()),
            "optimizer.grad_trigger" => fmt_f64(o.grad_trigger()),
            "optimizer.curvature_threshold" => fmt_f64(o.curvature_threshold()),
            "optimizer.probe_iters" => o.probe_iters().to_string(),
            "optimizer.check_every" => o.check_every().to_string(),
            "optimizer.temperature" => fmt_f64(o.temperature()),
            "optimizer.temp_decay" => fmt_f64(o.temp_decay()),
            "optimizer.beta" => fmt_f64(o.beta()),
            "optimizer.max_steps" => o.max_steps().to_string(),
            "ablation" => self.ablation.to_string(),
            "diag.every" => self.diag.every.to_string(),
            "diag.spectrum_every" => self.diag.spectrum_every.to_string(),
            "diag.window" => self.diag.window.to_string(),
            "diag.drop_frac" => fmt_f64(self.diag.drop_frac),
            other => unreachable!("unknown key {other}"),
        }
    }

    /// Every key with its effective value, one `key = value` line each.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for k in all_keys() {
            let v = self.value(k);
            if v.is_empty() {
                out.push_str(&format!("{k} =\n"));
            } else {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

fn set_optimizer(b: EeoConfigBuilder, name: &str, v: &str) -> Result<EeoConfigBuilder, String> {
    Ok(match name {
        "eta" => b.eta(finite(v)?),
        "rho" => b.rho(finite(v)?),
        "eps" => b.eps(finite(v)?),
        "scaling_mode" => b.scaling_mode(v.parse::<ScalingMode>()?),
        "alpha_fd" => b.alpha_fd(v.parse::<FdStep>()?),
        "negcur_kick" => b.negcur_kick(finite(v)?),
        "grad_trigger" => b.grad_trigger(finite(v)?),
        "curvature_threshold" => b.curvature_threshold(finite(v)?),
        "probe_iters" => b.probe_iters(num(v)?),
        "check_every" => b.check_every(num(v)?),
        "temperature" => b.temperature(finite(v)?),
        "temp_decay" => b.temp_decay(finite(v)?),
        "beta" => b.beta(finite(v)?),
        "max_steps" => b.max_steps(num(v)?),
        other => return Err(format!("unknown optimizer key {other:?}")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const REQUIRED: &str = "experiment = demo\ntask = landscape\n";

    fn parse(text: &str) -> Result<RunConfig, HarnessError> {
        RunConfig::parse_str(text, None)
    }

    #[test]
    fn key_table_is_complete() {
        let cfg = RunConfig::new("x", TaskKind::Forecast);
        assert_eq!(cfg.echo().lines().count(), KEYS.len());
        assert_eq!(OPTIMIZER_KEYS.len(), 14);
    }

    #[test]
    fn missing_required_keys_are_listed() {
        let msg = parse("").unwrap_err().to_string();
        assert!(msg.contains("experiment") && msg.contains("task"), "{msg}");
        let msg = parse("task = forecast").unwrap_err().to_string();
        assert!(msg.contains("experiment") && !msg.contains("task,"), "{msg}");
    }

    #[test]
    fn single_override_keeps_other_defaults() {
        let cfg = parse(&format!("{REQUIRED}optimizer.rho = 0.1\n")).unwrap();
        assert_eq!(cfg.optimizer.rho(), 0.1);
        let d = EeoConfig::default();
        assert_eq!(cfg.optimizer.eta(), d.eta());
        assert_eq!(cfg.optimizer.beta(), d.beta());
        let echo = cfg.echo();
        assert!(echo.contains("optimizer.rho = 0.1\n"));
        assert!(echo.contains("optimizer.eta = 0.001\n"));
        assert!(echo.contains("optimizer.temp_decay = 0.999\n"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("# header\n\nbogus.key = 1\n", 3, "unknown key"),
            ("optimizer.eta = fast\n", 1, "optimizer.eta"),
            ("\noptimizer.beta = 2\n", 2, "beta"),
            ("data.split = 0.5,0.5,0.5\n", 1, "sum to 1"),
            ("model.layers = 7\n", 1, "1..=4"),
            ("seed = 1\nseed = 2\n", 2, "duplicate"),
            ("just words\n", 1, "key = value"),
            ("data.path = /definitely/not/here.csv\n", 1, "does not exist"),
        ];
        for (body, line, needle) in cases {
            let err = parse(&format!("{body}{REQUIRED}")).unwrap_err();
            let msg = err.to_string();
            assert!(msg.contains(&format!("line {line}")), "{body:?}: {msg}");
            assert!(msg.contains(needle), "{body:?}: {msg}");
        }
    }

    #[test]
    fn cross_key_errors_point_at_the_key() {
        let err = parse(&format!("{REQUIRED}landscape.kind = quadratic\nlandscape.start = 1,2,3\n")).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        let err = parse("experiment = e\ntask = forecast\ndata.lookback = 10\nmodel.patch_len = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn echo_is_a_fixed_point() {
        let text = format!(
            "{REQUIRED}seed = 7\nlandscape.kind = quadratic\nlandscape.diag = 1, 10, 0.5\n\
             optimizer.alpha_fd = 0.002\noptimizer.scaling_mode = abs_param\nablation = sam,ema\n\
             data.split = 0.6,0.2,0.2\ndiag.drop_frac = 0.25\n"
        );
        let cfg = parse(&text).unwrap();
        let echo = cfg.echo();
        let again = parse(&echo).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.echo(), echo);
        assert_eq!(cfg.optimizer.seed(), 7);
    }

    #[test]
    fn ablation_parsing_and_application() {
        assert_eq!("none".parse::<Ablation>().unwrap(), Ablation::NONE);
        assert_eq!("".parse::<Ablation>().unwrap(), Ablation::NONE);
        assert_eq!("sam,escape,sgld,ema".parse::<Ablation>().unwrap(), Ablation::FULL);
        assert!("sam,adam".parse::<Ablation>().is_err());
        let off = Ablation::NONE.apply(&EeoConfig::default());
        assert_eq!((off.rho(), off.negcur_kick(), off.temperature(), off.beta()), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(Ablation::NONE.to_string(), "none");
    }
}
