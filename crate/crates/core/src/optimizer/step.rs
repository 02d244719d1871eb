use rand::Rng;

use super::{EeoConfig, FdStep, OptimizerError, ScalingMode};
use crate::linalg::power_iteration_from;
use crate::objective::{default_hvp_step, fd_hvp, Batch, Objective, ParamVector};
use crate::rng::{standard_normals, stream_rng, Stream};

/// `run` stops early once `‖g‖` falls to this and the last curvature probe
/// found no negative curvature.
pub const EARLY_STOP_GRAD: f64 = 1e-10;

/// Smallest-eigenvalue estimate from the curvature probe.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureEstimate {
    pub lambda: f64,
    /// Unit-norm direction.
    pub v: ParamVector,
    /// Hessian-vector products spent (both phases).
    pub probes_used: usize,
    pub alpha_used: f64,
}

/// Optimizer state. Owned by a single run.
#[derive(Clone, Debug, PartialEq)]
pub struct EeoState {
    pub w: ParamVector,
    /// Moving-average shadow of `w`.
    pub m: ParamVector,
    pub step: u64,
    pub last_curvature: Option<CurvatureEstimate>,
    pub escaped_count: u64,
    pub temperature_now: f64,
}

impl EeoState {
    /// Warm start: the shadow begins at `w0`.
    pub fn new(w0: ParamVector, cfg: &EeoConfig) -> Self {
        Self {
            m: w0.clone(),
            w: w0,
            step: 0,
            last_curvature: None,
            escaped_count: 0,
            temperature_now: cfg.temperature(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub loss_before: f64,
    pub loss_after: f64,
    /// `‖g(w)‖` at the start of the step.
    pub grad_norm: f64,
    pub sam_applied: bool,
    pub escape_fired: bool,
    /// Present only on steps where the curvature probe ran.
    pub lambda_min_est: Option<f64>,
    pub noise_norm: f64,
}

/// `s(w)` for the outer perturbation.
pub fn scaling(mode: ScalingMode, w: &ParamVector) -> ParamVector {
    match mode {
        ScalingMode::Identity => ParamVector::filled(w.dim(), 1.0),
        ScalingMode::AbsParam => ParamVector(w.as_slice().iter().map(|x| x.abs() + 1e-12).collect()),
    }
}

/// `e_w = ρ·(s(w)⊙g) / (‖s(w)⊙g‖ + ε)`.
pub fn outer_perturbation(w: &ParamVector, g: &ParamVector, cfg: &EeoConfig) -> ParamVector {
    let sg = scaling(cfg.scaling_mode(), w).hadamard(g);
    let n = sg.norm();
    sg.scale(cfg.rho() / (n + cfg.eps()))
}

/// Gradient at the perturbed point `w + e_w`, with `e_w` built from the
/// gradient at `w` on the same batch.
pub fn sam_gradient<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    cfg: &EeoConfig,
    batch: &Batch,
) -> Result<ParamVector, OptimizerError> {
    let g = obj.grad(w, batch);
    check_grad(&g, w, 0.0)?;
    sam_from_base(obj, w, &g, cfg, batch)
}

fn sam_from_base<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    g: &ParamVector,
    cfg: &EeoConfig,
    batch: &Batch,
) -> Result<ParamVector, OptimizerError> {
    if cfg.rho() == 0.0 {
        return Ok(g.clone());
    }
    let e = outer_perturbation(w, g, cfg);
    let g_sam = obj.grad(&w.add(&e), batch);
    check_grad(&g_sam, w, e.norm())?;
    Ok(g_sam)
}

fn check_grad(g: &ParamVector, w: &ParamVector, e_norm: f64) -> Result<(), OptimizerError> {
    if g.is_finite() {
        Ok(())
    } else {
        Err(OptimizerError::NonFiniteGradient {
            w_norm: w.norm(),
            e_norm,
        })
    }
}

/// Two-phase shifted power iteration on finite-difference Hessian-vector
/// products.
///
/// Phase one finds the largest-magnitude eigenvalue `λ_top`. Phase two runs
/// on `v ↦ c·v − Ĥv` with `c = |λ_top| + 1`, whose dominant eigenvalue is
/// `c − λ_min`. `counter` selects the random start vectors.
pub fn estimate_min_curvature<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    cfg: &EeoConfig,
    batch: &Batch,
    counter: u64,
) -> Result<CurvatureEstimate, OptimizerError> {
    let dim = obj.dim();
    let alpha = match cfg.alpha_fd() {
        FdStep::Auto => default_hvp_step(w),
        FdStep::Fixed(a) => a,
    };
    let iters = cfg.probe_iters();
    let hvp = |v: &[f64]| -> Result<Vec<f64>, OptimizerError> {
        Ok(fd_hvp(obj, w, &ParamVector(v.to_vec()), alpha, batch)?.into_vec())
    };

    let mut rng = stream_rng(cfg.seed(), Stream::Curvature, counter);
    let start_top = standard_normals(&mut rng, dim);
    let start_min = standard_normals(&mut rng, dim);

    let top = power_iteration_from(hvp, start_top, iters)?;
    let shift = top.lambda.abs() + 1.0;
    let shifted = power_iteration_from(
        |v: &[f64]| {
            let hv = hvp(v)?;
            Ok::<_, OptimizerError>(v.iter().zip(hv).map(|(x, h)| shift * x - h).collect())
        },
        start_min,
        iters,
    )?;
    let lambda = shift - shifted.lambda;
    if !lambda.is_finite() {
        return Err(OptimizerError::NonFiniteIterate("curvature probe"));
    }
    Ok(CurvatureEstimate {
        lambda,
        v: ParamVector(shifted.vector),
        probes_used: 2 * iters,
        alpha_used: alpha,
    })
}

/// Kick along the negative-curvature direction when the gradient is small
/// and the estimate is below `−curvature_threshold`.
///
/// The sign of the kick is the one with the lower loss after the step.
pub fn negcur_escape<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    est: &CurvatureEstimate,
    cfg: &EeoConfig,
    batch: &Batch,
) -> Result<(ParamVector, bool), OptimizerError> {
    if est.lambda.is_nan() || est.lambda >= -cfg.curvature_threshold() {
        return Ok((w.clone(), false));
    }
    let g = obj.grad(w, batch);
    check_grad(&g, w, 0.0)?;
    if g.norm() > cfg.grad_trigger() {
        return Ok((w.clone(), false));
    }
    let step = cfg.escape_step();
    let dir = est.v.scale(1.0 / est.v.norm());
    let plus = w.add_scaled(step, &dir);
    let minus = w.add_scaled(-step, &dir);
    let w_new = if obj.loss(&minus, batch) < obj.loss(&plus, batch) {
        minus
    } else {
        plus
    };
    Ok((w_new, true))
}

/// `√(2ηT)·z` with `z ~ N(0, I)`.
pub fn sgld_noise<R: Rng + ?Sized>(dim: usize, eta: f64, temperature: f64, rng: &mut R) -> ParamVector {
    if temperature == 0.0 {
        return ParamVector::zeros(dim);
    }
    let scale = (2.0 * eta * temperature).sqrt();
    ParamVector(standard_normals(rng, dim)).scale(scale)
}

/// `β·m + (1 − β)·w`.
pub fn ema_update(m: &ParamVector, w: &ParamVector, beta: f64) -> ParamVector {
    if beta == 0.0 {
        return w.clone();
    }
    if beta == 1.0 {
        return m.clone();
    }
    ParamVector(
        m.as_slice()
            .iter()
            .zip(w.as_slice())
            .map(|(a, b)| beta * a + (1.0 - beta) * b)
            .collect(),
    )
}

/// One optimizer step. Errors carry the step index.
pub fn eeo_step<O: Objective + ?Sized>(
    obj: &O,
    state: EeoState,
    cfg: &EeoConfig,
) -> Result<(EeoState, StepReport), OptimizerError> {
    let step = state.step;
    step_inner(obj, state, cfg).map_err(|e| OptimizerError::Step {
        step,
        source: Box::new(e),
    })
}

fn step_inner<O: Objective + ?Sized>(
    obj: &O,
    mut state: EeoState,
    cfg: &EeoConfig,
) -> Result<(EeoState, StepReport), OptimizerError> {
    if state.w.dim() != obj.dim() || state.m.dim() != obj.dim() {
        return Err(OptimizerError::DimMismatch {
            expected: obj.dim(),
            got: state.w.dim(),
        });
    }
    let step = state.step;
    let batch = obj.sample_batch(cfg.seed(), step);

    let (loss_before, g) = obj.loss_and_grad(&state.w, &batch);
    check_grad(&g, &state.w, 0.0)?;
    let g_sam = sam_from_base(obj, &state.w, &g, cfg, &batch)?;
    let mut w = state.w.add_scaled(-cfg.eta(), &g_sam);

    let mut lambda_min_est = None;
    let mut escape_fired = false;
    if cfg.negcur_kick() > 0.0 && step.is_multiple_of(cfg.check_every()) {
        let est = estimate_min_curvature(obj, &w, cfg, &batch, step)?;
        lambda_min_est = Some(est.lambda);
        let (kicked, fired) = negcur_escape(obj, &w, &est, cfg, &batch)?;
        w = kicked;
        escape_fired = fired;
        state.last_curvature = Some(est);
    }

    let mut noise_norm = 0.0;
    if state.temperature_now > 0.0 {
        let mut rng = stream_rng(cfg.seed(), Stream::Sgld, step);
        let noise = sgld_noise(w.dim(), cfg.eta(), state.temperature_now, &mut rng);
        noise_norm = noise.norm();
        w = w.add(&noise);
    }
    if !w.is_finite() {
        return Err(OptimizerError::NonFiniteIterate("update"));
    }

    state.m = ema_update(&state.m, &w, cfg.beta());
    let loss_after = obj.loss(&w, &batch);
    state.w = w;
    state.step += 1;
    state.temperature_now = cfg.temperature() * cfg.temp_decay().powf(state.step as f64);
    if escape_fired {
        state.escaped_count += 1;
    }

    let report = StepReport {
        step,
        loss_before,
        loss_after,
        grad_norm: g.norm(),
        sam_applied: cfg.rho() > 0.0,
        escape_fired,
        lambda_min_est,
        noise_norm,
    };
    Ok((state, report))
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// The moving-average shadow at the end of the run.
    pub final_params: ParamVector,
    pub final_state: EeoState,
    pub history: Vec<StepReport>,
}

/// Runs up to `max_steps` steps from `w0`, stopping early at a point with
/// vanishing gradient and no detected negative curvature.
pub fn run<O: Objective + ?Sized>(obj: &O, w0: ParamVector, cfg: &EeoConfig) -> Result<RunOutput, OptimizerError> {
    run_with(obj, w0, cfg, |_, _| {})
}

/// [`run`] with a callback invoked after every step (used for diagnostics).
pub fn run_with<O: Objective + ?Sized>(
    obj: &O,
    w0: ParamVector,
    cfg: &EeoConfig,
    mut on_step: impl FnMut(&EeoState, &StepReport),
) -> Result<RunOutput, OptimizerError> {
    if w0.dim() != obj.dim() {
        return Err(OptimizerError::DimMismatch {
            expected: obj.dim(),
            got: w0.dim(),
        });
    }
    let mut state = EeoState::new(w0, cfg);
    let mut history = Vec::with_capacity(cfg.max_steps().min(1 << 20) as usize);
    while state.step < cfg.max_steps() {
        let (next, report) = eeo_step(obj, state, cfg)?;
        state = next;
        on_step(&state, &report);
        let flat = report.grad_norm <= EARLY_STOP_GRAD;
        history.push(report);
        let no_negative_curvature = state
            .last_curvature
            .as_ref()
            .is_some_and(|c| c.lambda >= -cfg.curvature_threshold());
        if flat && no_negative_curvature {
            break;
        }
    }
    Ok(RunOutput {
        final_params: state.m.clone(),
        final_state: state,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::objective::{robust_objective_estimate, Landscape, LandscapeSpec};
    use crate::rng::uniforms;
    use proptest::prelude::*;

    fn quad(diag: &[f64]) -> Landscape {
        LandscapeSpec::Quadratic {
            a: Matrix::from_diag(diag),
            b: vec![0.0; diag.len()],
        }
        .build()
        .unwrap()
    }

    fn plain_gd(eta: f64, steps: u64) -> EeoConfig {
        EeoConfig::builder()
            .eta(eta)
            .rho(0.0)
            .temperature(0.0)
            .negcur_kick(0.0)
            .beta(0.0)
            .max_steps(steps)
            .build()
            .unwrap()
    }

    #[test]
    fn scaling_modes() {
        let w = ParamVector::from(vec![-2.0, 0.0, 3.0]);
        assert_eq!(scaling(ScalingMode::Identity, &w).as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(scaling(ScalingMode::AbsParam, &w).as_slice(), &[2.0 + 1e-12, 1e-12, 3.0 + 1e-12]);
        assert_eq!(scaling(ScalingMode::AbsParam, &w.scale(-1.0)), scaling(ScalingMode::AbsParam, &w));
    }

    #[test]
    fn outer_perturbation_cases() {
        let cfg = EeoConfig::builder().rho(1.0).build().unwrap();
        let w = ParamVector::from(vec![1.0, 1.0]);
        assert_eq!(outer_perturbation(&w, &ParamVector::zeros(2), &cfg), ParamVector::zeros(2));
        let e = outer_perturbation(&w, &ParamVector::from(vec![3.0, 4.0]), &cfg);
        assert!((e[0] - 0.6).abs() < 1e-12 && (e[1] - 0.8).abs() < 1e-12);
        let abs_cfg = cfg.to_builder().scaling_mode(ScalingMode::AbsParam).build().unwrap();
        let e2 = outer_perturbation(&w, &ParamVector::from(vec![3.0, 4.0]), &abs_cfg);
        assert!(e2.sub(&e).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn perturbation_within_radius(
            w in prop::collection::vec(-10.0f64..10.0, 1..8),
            g in prop::collection::vec(-10.0f64..10.0, 1..8),
            rho in 0.0f64..2.0,
            abs in any::<bool>(),
        ) {
            let n = w.len().min(g.len());
            let mode = if abs { ScalingMode::AbsParam } else { ScalingMode::Identity };
            let cfg = EeoConfig::builder().rho(rho).scaling_mode(mode).build().unwrap();
            let e = outer_perturbation(&ParamVector::from(w[..n].to_vec()), &ParamVector::from(g[..n].to_vec()), &cfg);
            prop_assert!(e.norm() <= rho * (1.0 + 1e-12));
        }
    }

    #[test]
    fn sam_gradient_cases() {
        let q = LandscapeSpec::Quadratic {
            a: Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap(),
            b: vec![0.0; 2],
        }
        .build()
        .unwrap();
        let w = ParamVector::from(vec![0.4, -0.7]);
        let zero = EeoConfig::builder().rho(0.0).build().unwrap();
        assert_eq!(sam_gradient(&q, &w, &zero, &Batch::Full).unwrap(), q.grad_full(&w));

        let cfg = EeoConfig::builder().rho(0.1).build().unwrap();
        let g = q.grad_full(&w);
        let e = g.scale(0.1 / (g.norm() + 1e-12));
        let wp = w.add(&e);
        let want = [2.0 * wp[0] + 0.5 * wp[1], 0.5 * wp[0] + wp[1]];
        let got = sam_gradient(&q, &w, &cfg, &Batch::Full).unwrap();
        assert!((got[0] - want[0]).abs() < 1e-14 && (got[1] - want[1]).abs() < 1e-14);
    }

    #[test]
    fn sam_step_decreases_robust_objective() {
        let q = quad(&[1.0, 10.0]);
        let cfg = EeoConfig::builder().rho(0.05).build().unwrap();
        let w = ParamVector::from(vec![1.0, 1.0]);
        let g_sam = sam_gradient(&q, &w, &cfg, &Batch::Full).unwrap();
        let w1 = w.add_scaled(-0.05, &g_sam);
        let before = robust_objective_estimate(&q, &w, 0.05, 64, 1).unwrap();
        let after = robust_objective_estimate(&q, &w1, 0.05, 64, 1).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn min_curvature_estimates() {
        let cfg = EeoConfig::builder().probe_iters(100).build().unwrap();
        let q = quad(&[2.0, -5.0]);
        let est = estimate_min_curvature(&q, &ParamVector::from(vec![0.3, 0.2]), &cfg, &Batch::Full, 0).unwrap();
        assert!((est.lambda + 5.0).abs() < 1e-4, "{}", est.lambda);
        assert!((est.v[1].abs() - 1.0).abs() < 1e-4);
        assert!((est.v.norm() - 1.0).abs() < 1e-10);
        assert_eq!(est.probes_used, 200);

        let id = quad(&[1.0, 1.0, 1.0]);
        let est = estimate_min_curvature(&id, &ParamVector::zeros(3), &cfg, &Batch::Full, 1).unwrap();
        assert!((est.lambda - 1.0).abs() < 1e-6);

        let saddle = LandscapeSpec::Saddle.build().unwrap();
        let est = estimate_min_curvature(&saddle, &ParamVector::zeros(2), &cfg, &Batch::Full, 2).unwrap();
        assert!((est.lambda + 2.0).abs() < 1e-4);
        assert!((est.v[1].abs() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn escape_on_saddle() {
        let saddle = LandscapeSpec::Saddle.build().unwrap();
        let cfg = EeoConfig::builder()
            .rho(0.1)
            .negcur_kick(1.0)
            .grad_trigger(0.01)
            .probe_iters(50)
            .build()
            .unwrap();
        let w = ParamVector::from(vec![1e-3, 0.0]);
        let est = estimate_min_curvature(&saddle, &w, &cfg, &Batch::Full, 0).unwrap();
        let (w1, fired) = negcur_escape(&saddle, &w, &est, &cfg, &Batch::Full).unwrap();
        assert!(fired);
        assert!((w1[1].abs() - 0.1).abs() < 1e-6);
        let drop = saddle.loss_full(&w) - saddle.loss_full(&w1);
        assert!((drop - 0.01).abs() < 1e-5, "{drop}");
    }

    #[test]
    fn escape_gates() {
        let cfg = EeoConfig::builder().grad_trigger(0.01).build().unwrap();
        let id = quad(&[1.0, 1.0]);
        for x in [0.0, 1e-3, 5.0] {
            let w = ParamVector::from(vec![x, -x]);
            let est = estimate_min_curvature(&id, &w, &cfg, &Batch::Full, 0).unwrap();
            assert!(!negcur_escape(&id, &w, &est, &cfg, &Batch::Full).unwrap().1);
        }
        // Large gradient: never fires even with a strongly negative estimate.
        let saddle = LandscapeSpec::Saddle.build().unwrap();
        let w = ParamVector::from(vec![1.0, 0.0]);
        let est = CurvatureEstimate {
            lambda: -100.0,
            v: ParamVector::basis(2, 1),
            probes_used: 0,
            alpha_used: 1e-3,
        };
        let (w1, fired) = negcur_escape(&saddle, &w, &est, &cfg, &Batch::Full).unwrap();
        assert!(!fired);
        assert_eq!(w1, w);
    }

    #[test]
    fn sgld_noise_properties() {
        let mut rng = stream_rng(0, Stream::Sgld, 0);
        assert_eq!(sgld_noise(5, 0.1, 0.0, &mut rng), ParamVector::zeros(5));

        // E‖noise‖² = 2ηT·dim = 10; the mean of 200 draws of a scaled χ²(1000)
        // has relative sd sqrt(2/1000)/sqrt(200) ≈ 0.3%.
        let mean: f64 = (0..200)
            .map(|i| {
                let mut rng = stream_rng(1, Stream::Sgld, i);
                let n = sgld_noise(1000, 0.01, 0.5, &mut rng).norm();
                n * n
            })
            .sum::<f64>()
            / 200.0;
        assert!((mean - 10.0).abs() < 1.0, "{mean}");

        let a = sgld_noise(8, 0.1, 1.0, &mut stream_rng(4, Stream::Sgld, 9));
        let b = sgld_noise(8, 0.1, 1.0, &mut stream_rng(4, Stream::Sgld, 9));
        assert_eq!(a, b);
    }

    #[test]
    fn ema_cases() {
        let m = ParamVector::from(vec![0.0]);
        let w = ParamVector::from(vec![1.0]);
        assert_eq!(ema_update(&m, &w, 0.0), w);
        assert_eq!(ema_update(&m, &w, 1.0), m);
        assert!((ema_update(&m, &w, 0.9)[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn mechanisms_off_is_gradient_descent() {
        let q = quad(&[1.0, 4.0]);
        let w0 = ParamVector::from(vec![1.0, -0.5]);
        let out = run(&q, w0.clone(), &plain_gd(0.1, 30)).unwrap();
        let mut w = w0;
        for _ in 0..30 {
            w = w.sub(&q.grad_full(&w).scale(0.1));
        }
        assert_eq!(out.final_params, w);
        // Closed form (1 − ηa)^t.
        assert!((out.final_params[0] - 0.9f64.powi(30)).abs() < 1e-14);
        assert!((out.final_params[1] + 0.5 * 0.6f64.powi(30)).abs() < 1e-14);
    }

    #[test]
    fn max_steps_zero_returns_start() {
        let q = quad(&[1.0]);
        let out = run(&q, ParamVector::from(vec![3.0]), &plain_gd(0.1, 0)).unwrap();
        assert_eq!(out.final_params.as_slice(), &[3.0]);
        assert!(out.history.is_empty());
    }

    #[test]
    fn early_stop_at_strict_minimum() {
        let q = quad(&[1.0, 1.0]);
        let cfg = EeoConfig::builder()
            .eta(0.5)
            .rho(0.0)
            .temperature(0.0)
            .check_every(1)
            .beta(0.0)
            .max_steps(10_000)
            .build()
            .unwrap();
        let out = run(&q, ParamVector::from(vec![1.0, 1.0]), &cfg).unwrap();
        assert!(out.history.len() < 200, "{}", out.history.len());
        assert!(out.history.last().unwrap().grad_norm <= EARLY_STOP_GRAD);
    }

    #[test]
    fn toy_linear_converges() {
        let land = LandscapeSpec::ToyLinear {
            n: 64,
            lookback: 6,
            horizon: 2,
            sigma: 0.0,
            seed: 3,
        }
        .build()
        .unwrap();
        let cfg = EeoConfig::builder().eta(0.05).beta(0.99).max_steps(2000).build().unwrap();
        let out = run(&land, ParamVector::zeros(land.dim()), &cfg).unwrap();
        let loss = land.loss_full(&out.final_params);
        assert!(loss <= 1e-6, "{loss}");
    }

    #[test]
    fn escape_only_under_joint_trigger_and_ema_bounded() {
        let saddle = LandscapeSpec::Saddle.build().unwrap();
        let cfg = EeoConfig::builder()
            .eta(0.01)
            .check_every(1)
            .max_steps(300)
            .seed(5)
            .build()
            .unwrap();
        let mut ws = Vec::new();
        let mut ms = Vec::new();
        let out = run_with(&saddle, ParamVector::from(vec![1e-3, 0.0]), &cfg, |s, _| {
            ws.push(s.w[0]);
            ms.push(s.m[0]);
        })
        .unwrap();
        for r in &out.history {
            if r.escape_fired {
                assert!(r.lambda_min_est.unwrap() < -cfg.curvature_threshold());
            }
        }
        assert!(out.final_state.escaped_count >= 1);
        let mut lo: f64 = 1e-3;
        let mut hi: f64 = 1e-3;
        for (w, m) in ws.iter().zip(&ms) {
            lo = lo.min(*w);
            hi = hi.max(*w);
            assert!(*m >= lo - 1e-15 && *m <= hi + 1e-15);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let land = quad(&[1.0, -0.5, 2.0]);
        let cfg = EeoConfig::builder().eta(0.01).max_steps(100).seed(9).build().unwrap();
        let mut rng = stream_rng(2, Stream::Start, 0);
        let w0 = ParamVector::from(uniforms(&mut rng, 3, -1.0, 1.0));
        let a = run(&land, w0.clone(), &cfg).unwrap();
        let b = run(&land, w0, &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.final_params, b.final_params);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let q = quad(&[1.0, 1.0]);
        assert!(matches!(
            run(&q, ParamVector::zeros(3), &EeoConfig::default()),
            Err(OptimizerError::DimMismatch { .. })
        ));
    }
}
