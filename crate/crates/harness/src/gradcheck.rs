//! Analytic gradients against central differences for every builtin
//! landscape and both transformer objectives.

use std::fmt;

use eeo_core::linalg::Matrix;
use eeo_core::objective::{fd_grad, Batch, LandscapeSpec, Objective, ParamVector, TwoWellParams};
use eeo_core::rng::{stream_rng, uniforms, Stream};
use eeo_core::transformer::{ModelObjective, ModelParams, ModelShape};

use crate::data::{sine_mixture, window_series, WindowSpec};

pub const POINTS: usize = 10;
pub const FD_STEP: f64 = 1e-6;
pub const REL_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub objective: String,
    pub points: usize,
    /// Largest `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖)` over the points.
    pub worst_rel: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.worst_rel <= REL_TOL
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradReport {
    pub checks: Vec<GradCheck>,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(GradCheck::passed)
    }
}

impl fmt::Display for GradReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<16} worst relative error {:.3e} over {} points (tol {REL_TOL:e})",
                if c.passed() { "PASS" } else { "FAIL" },
                c.objective,
                c.worst_rel,
                c.points
            )?;
        }
        write!(f, "{} overall", if self.passed() { "PASS" } else { "FAIL" })
    }
}

pub fn relative_error<O: Objective + ?Sized>(obj: &O, w: &ParamVector) -> f64 {
    let g = obj.grad_full(w);
    let Ok(fd) = fd_grad(obj, w, FD_STEP, &Batch::Full) else {
        return f64::INFINITY;
    };
    let scale = g.norm().max(fd.norm()).max(1e-8);
    let err = g.sub(&fd).norm() / scale;
    if err.is_nan() { f64::INFINITY } else { err }
}

fn check<O: Objective + ?Sized>(name: &str, obj: &O, points: impl Iterator<Item = ParamVector>) -> GradCheck {
    let mut n = 0;
    let mut worst = 0.0_f64;
    for w in points {
        worst = worst.max(relative_error(obj, &w));
        n += 1;
    }
    GradCheck {
        objective: name.to_string(),
        points: n,
        worst_rel: worst,
    }
}

fn uniform_points(seed: u64, dim: usize, lo: f64, hi: f64) -> impl Iterator<Item = ParamVector> {
    (0..POINTS).map(move |i| {
        let mut rng = stream_rng(seed, Stream::Start, i as u64);
        ParamVector::from(uniforms(&mut rng, dim, lo, hi))
    })
}

/// The builtin landscapes checked by [`gradcheck`].
pub fn landscapes(seed: u64) -> Vec<LandscapeSpec> {
    vec![
        LandscapeSpec::Quadratic {
            a: Matrix::from_rows(&[vec![2.0, 0.3, 0.0], vec![0.3, 1.0, -0.4], vec![0.0, -0.4, 3.0]])
                .expect("3x3"),
            b: vec![0.1, -0.2, 0.3],
        },
        LandscapeSpec::Saddle,
        LandscapeSpec::Cubic { dim: 4 },
        LandscapeSpec::TwoWell(TwoWellParams::default()),
        LandscapeSpec::ToyLinear {
            n: 32,
            lookback: 6,
            horizon: 2,
            sigma: 0.1,
            seed,
        },
    ]
}

/// Small transformer shape for the checks.
pub fn model_shape(vars: usize) -> ModelShape {
    ModelShape {
        patch_len: 4,
        d_m: 3,
        d_out: 2,
        layers: 2,
        ..ModelShape::channel(vars, 8, 2, 4)
    }
}

pub fn gradcheck(seed: u64) -> GradReport {
    let mut checks = Vec::new();
    for spec in landscapes(seed) {
        let land = spec.build().expect("builtin landscape is valid");
        let (lo, hi) = if spec.name() == "two_well" { (-2.0, 2.0) } else { (-1.0, 1.0) };
        checks.push(check(spec.name(), &land, uniform_points(seed, land.dim(), lo, hi)));
    }

    let series = sine_mixture(120, 0.1, seed);
    let data = window_series(&series, &WindowSpec::new(8, 2, [1.0, 0.0, 0.0])).expect("long enough series");
    let windows: Vec<_> = data.train.into_iter().step_by(16).collect();
    let shape = model_shape(series.cols());
    let params = |i: usize| {
        ModelParams::init(&shape, seed.wrapping_mul(1_000).wrapping_add(i as u64))
            .expect("valid shape")
            .flatten()
    };
    let forecast = ModelObjective::forecast(shape, windows.clone()).expect("valid windows");
    checks.push(check("forecast", &forecast, (0..POINTS).map(params)));
    let init = ModelParams::init(&shape, seed).expect("valid shape");
    let align = ModelObjective::attention_align(shape, windows, &init, seed).expect("valid windows");
    checks.push(check("attention_align", &align, (0..POINTS).map(params)));
    GradReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_objectives_pass() {
        let r = gradcheck(0);
        assert_eq!(r.checks.len(), 7);
        assert!(r.checks.iter().all(|c| c.points == POINTS));
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        struct Wrong;
        impl Objective for Wrong {
            fn dim(&self) -> usize {
                2
            }
            fn loss(&self, w: &ParamVector, _: &Batch) -> f64 {
                w[0] * w[0] + w[1]
            }
            fn grad(&self, w: &ParamVector, _: &Batch) -> ParamVector {
                ParamVector::from(vec![w[0], 1.0])
            }
        }
        assert!(relative_error(&Wrong, &ParamVector::from(vec![1.0, 0.0])) > 0.1);
    }
}
