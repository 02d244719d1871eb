use std::fmt;
use std::str::FromStr;

use super::OptimizerError;

/// Choice of the elementwise scaling `s(w)` applied to the gradient before
/// the outer perturbation is normalised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScalingMode {
    /// `s(w) = 1`: plain SAM.
    #[default]
    Identity,
    /// `s(w) = |w| + 1e-12`: scale-adaptive perturbation.
    AbsParam,
}

impl fmt::Display for ScalingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::AbsParam => "abs_param",
        })
    }
}

impl FromStr for ScalingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identity" => Ok(Self::Identity),
            "abs_param" => Ok(Self::AbsParam),
            other => Err(format!("unknown scaling mode {other:?} (expected identity or abs_param)")),
        }
    }
}

/// Finite-difference step for Hessian-vector products.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum FdStep {
    /// `1e-3·(1 + ‖w‖∞)`, recomputed at every probe point.
    #[default]
    Auto,
    Fixed(f64),
}

impl fmt::Display for FdStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(a) => f.write_str(&crate::fmt_f64(*a)),
        }
    }
}

impl FromStr for FdStep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse::<f64>()
            .map(Self::Fixed)
            .map_err(|e| format!("expected `auto` or a number, got {s:?}: {e}"))
    }
}

macro_rules! config_fields {
    ($($(#[$doc:meta])* $name:ident : $ty:ty = $default:expr;)*) => {
        /// Hyperparameters of the escape-explore optimizer.
        ///
        /// Built through [`EeoConfig::builder`], which validates every range;
        /// the fields cannot be changed afterwards.
        #[derive(Clone, Debug, PartialEq)]
        pub struct EeoConfig {
            $($name: $ty,)*
        }

        impl EeoConfig {
            $(
                $(#[$doc])*
                pub fn $name(&self) -> $ty {
                    self.$name
                }
            )*
        }

        /// Builder for [`EeoConfig`]; unset fields keep their defaults.
        #[derive(Clone, Debug)]
        pub struct EeoConfigBuilder {
            $($name: $ty,)*
        }

        impl Default for EeoConfigBuilder {
            fn default() -> Self {
                Self { $($name: $default,)* }
            }
        }

        impl EeoConfigBuilder {
            $(
                pub fn $name(mut self, value: $ty) -> Self {
                    self.$name = value;
                    self
                }
            )*

            pub fn build(self) -> Result<EeoConfig, OptimizerError> {
                let cfg = EeoConfig { $($name: self.$name,)* };
                cfg.validate()?;
                Ok(cfg)
            }
        }

        impl From<&EeoConfig> for EeoConfigBuilder {
            fn from(cfg: &EeoConfig) -> Self {
                Self { $($name: cfg.$name,)* }
            }
        }
    };
}

config_fields! {
    /// Learning rate `η`.
    eta: f64 = 1e-3;
    /// Outer perturbation radius `ρ`; 0 disables the sharpness-aware step.
    rho: f64 = 0.05;
    /// Stabiliser added to the perturbation norm.
    eps: f64 = 1e-12;
    scaling_mode: ScalingMode = ScalingMode::Identity;
    alpha_fd: FdStep = FdStep::Auto;
    /// Escape step is `negcur_kick·ρ`; 0 disables curvature probing.
    negcur_kick: f64 = 1.0;
    /// Escape is only considered when `‖g‖` is at most this.
    grad_trigger: f64 = 1e-2;
    /// Escape fires when the curvature estimate is below `−curvature_threshold`.
    curvature_threshold: f64 = 1e-3;
    /// Power-iteration steps per phase of the curvature probe.
    probe_iters: usize = 20;
    /// Probe curvature on steps where `step % check_every == 0`.
    check_every: u64 = 10;
    /// Langevin temperature `T` at step 0.
    temperature: f64 = 1e-4;
    /// Per-step multiplicative temperature decay.
    temp_decay: f64 = 0.999;
    /// EMA coefficient `β`; 0 makes the shadow track the iterate exactly.
    beta: f64 = 0.999;
    seed: u64 = 0;
    max_steps: u64 = 1000;
}

impl Default for EeoConfig {
    fn default() -> Self {
        EeoConfigBuilder::default().build().expect("defaults are valid")
    }
}

impl EeoConfig {
    pub fn builder() -> EeoConfigBuilder {
        EeoConfigBuilder::default()
    }

    /// Starts a builder from this configuration.
    pub fn to_builder(&self) -> EeoConfigBuilder {
        EeoConfigBuilder::from(self)
    }

    /// Escape step length `negcur_kick·ρ`.
    pub fn escape_step(&self) -> f64 {
        self.negcur_kick * self.rho
    }

    fn validate(&self) -> Result<(), OptimizerError> {
        let mut problems = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                problems.push(msg);
            }
        };
        let finite = |x: f64| x.is_finite();
        check(finite(self.eta) && self.eta > 0.0, format!("eta must be > 0, got {}", self.eta));
        check(finite(self.rho) && self.rho >= 0.0, format!("rho must be >= 0, got {}", self.rho));
        check(finite(self.eps) && self.eps > 0.0, format!("eps must be > 0, got {}", self.eps));
        if let FdStep::Fixed(a) = self.alpha_fd {
            check(finite(a) && a > 0.0, format!("alpha_fd must be > 0, got {a}"));
        }
        check(
            finite(self.negcur_kick) && self.negcur_kick >= 0.0,
            format!("negcur_kick must be >= 0, got {}", self.negcur_kick),
        );
        check(
            finite(self.grad_trigger) && self.grad_trigger >= 0.0,
            format!("grad_trigger must be >= 0, got {}", self.grad_trigger),
        );
        check(
            finite(self.curvature_threshold) && self.curvature_threshold > 0.0,
            format!("curvature_threshold must be > 0, got {}", self.curvature_threshold),
        );
        check(self.probe_iters >= 1, "probe_iters must be >= 1".into());
        check(self.check_every >= 1, "check_every must be >= 1".into());
        check(
            finite(self.temperature) && self.temperature >= 0.0,
            format!("temperature must be >= 0, got {}", self.temperature),
        );
        check(
            self.temp_decay > 0.0 && self.temp_decay <= 1.0,
            format!("temp_decay must be in (0, 1], got {}", self.temp_decay),
        );
        check(
            (0.0..=1.0).contains(&self.beta),
            format!("beta must be in [0, 1], got {}", self.beta),
        );
        if problems.is_empty() {
            Ok(())
        } else {
            Err(OptimizerError::Config(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = EeoConfig::default();
        assert_eq!(c.eta(), 1e-3);
        assert_eq!(c.rho(), 0.05);
        assert_eq!(c.probe_iters(), 20);
        assert_eq!(c.check_every(), 10);
        assert_eq!(c.beta(), 0.999);
        assert_eq!(c.alpha_fd(), FdStep::Auto);
        assert!((c.escape_step() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn range_violations_are_reported_together() {
        let err = EeoConfig::builder().eta(0.0).beta(1.5).build().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("eta") && msg.contains("beta"), "{msg}");
        assert!(EeoConfig::builder().temp_decay(0.0).build().is_err());
        assert!(EeoConfig::builder().probe_iters(0).build().is_err());
        assert!(EeoConfig::builder().alpha_fd(FdStep::Fixed(-1.0)).build().is_err());
    }

    #[test]
    fn parse_enums() {
        assert_eq!("abs_param".parse::<ScalingMode>().unwrap(), ScalingMode::AbsParam);
        assert!("nope".parse::<ScalingMode>().is_err());
        assert_eq!("auto".parse::<FdStep>().unwrap(), FdStep::Auto);
        assert_eq!("0.01".parse::<FdStep>().unwrap(), FdStep::Fixed(0.01));
        assert_eq!(FdStep::Fixed(0.01).to_string(), "0.01");
    }
}
