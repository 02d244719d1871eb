//! Numerical checks of the optimizer's local guarantees.
//!
//! * `lemma2`: the sampled robust objective satisfies
//!   `U_ρ − L = ρ‖g‖ + O(ρ²)`, and one sharpness-aware step decreases it.
//! * `lemma3`: finite-difference Hessian-vector products are second-order
//!   accurate, exact on quadratics, and a curvature kick at a near-critical
//!   saddle decreases the loss by at least `η²γ/4`.
//! * `lemma4`: one noisy step decreases the robust objective in expectation,
//!   up to the `η·T·d` noise allowance.

use std::fmt;
use std::str::FromStr;

use eeo_core::linalg::Matrix;
use eeo_core::objective::{
    fd_hvp, robust_objective_estimate, Batch, Landscape, LandscapeSpec, Objective, ParamVector, RobustSampler,
};
use eeo_core::optimizer::{eeo_step, estimate_min_curvature, negcur_escape, sam_gradient, EeoConfig, EeoState};
use eeo_core::rng::{standard_normals, stream_rng, uniforms, Stream};

/// Points (or trials) per check.
pub const TRIALS: usize = 10;
/// Robust-objective directions for the expansion check.
pub const EXPANSION_SAMPLES: usize = 256;
/// Radius at which the quadratic residual constant is fitted.
pub const FIT_RHO: f64 = 1e-1;
/// Multiplier on the fitted residual constant before validation.
pub const FIT_SLACK: f64 = 1.5;
pub const VALIDATION_RHOS: [f64; 2] = [1e-2, 1e-3];
pub const HVP_ALPHAS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];
pub const RATIO_RANGE: (f64, f64) = (0.2, 0.3);
/// Relative tolerance for FD-HVP exactness on quadratics.
pub const QUADRATIC_HVP_TOL: f64 = 1e-8;
pub const LEMMA4_STEPS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Lemma2,
    Lemma3,
    Lemma4,
    All,
}

impl FromStr for Which {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lemma2" => Ok(Self::Lemma2),
            "lemma3" => Ok(Self::Lemma3),
            "lemma4" => Ok(Self::Lemma4),
            "all" => Ok(Self::All),
            _ => Err(format!("unknown check {s:?} (expected lemma2, lemma3, lemma4 or all)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub lemma: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of a set of checks. Informational lines do not affect `passed`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LemmaReport {
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, lemma: &str, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.lemma == lemma && c.name == name)
    }

    fn push(&mut self, lemma: &'static str, name: &'static str, passed: bool, detail: String) {
        self.checks.push(Check {
            lemma,
            name,
            passed,
            detail,
        });
    }
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {}/{}: {}", c.lemma, c.name, c.detail)?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        let overall = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{overall} overall")
    }
}

pub fn lemma_check(which: Which, seed: u64) -> LemmaReport {
    let mut report = LemmaReport::default();
    if matches!(which, Which::Lemma2 | Which::All) {
        lemma2(seed, &mut report);
    }
    if matches!(which, Which::Lemma3 | Which::All) {
        lemma3(seed, &mut report);
    }
    if matches!(which, Which::Lemma4 | Which::All) {
        lemma4(seed, &mut report);
    }
    report
}

fn quadratic(diag: &[f64]) -> Landscape {
    LandscapeSpec::Quadratic {
        a: Matrix::from_diag(diag),
        b: vec![0.0; diag.len()],
    }
    .build()
    .expect("diagonal quadratic is valid")
}

fn point(seed: u64, i: usize, dim: usize, lo: f64, hi: f64) -> ParamVector {
    let mut rng = stream_rng(seed, Stream::Start, i as u64);
    ParamVector::from(uniforms(&mut rng, dim, lo, hi))
}

fn unit(seed: u64, i: usize, dim: usize) -> ParamVector {
    let mut rng = stream_rng(seed, Stream::Curvature, 1_000 + i as u64);
    let v = ParamVector::from(standard_normals(&mut rng, dim));
    v.scale(1.0 / v.norm())
}

/// `U_ρ(w) − L(w) − ρ‖g(w)‖` with the sampled `U_ρ`.
fn expansion_residual(obj: &Landscape, w: &ParamVector, rho: f64, seed: u64) -> f64 {
    let u = robust_objective_estimate(obj, w, rho, EXPANSION_SAMPLES, seed).expect("valid radius");
    u - obj.loss_full(w) - rho * obj.grad_full(w).norm()
}

/// Residual constant fitted at [`FIT_RHO`] over `points`, then checked at
/// [`VALIDATION_RHOS`]. Returns `(C, worst validation ratio |r|/(Cρ²))`.
pub fn expansion_fit(obj: &Landscape, points: &[ParamVector], seed: u64) -> (f64, f64) {
    let c = points
        .iter()
        .enumerate()
        .map(|(i, w)| expansion_residual(obj, w, FIT_RHO, seed + i as u64).abs() / (FIT_RHO * FIT_RHO))
        .fold(0.0, f64::max)
        * FIT_SLACK;
    let worst = points
        .iter()
        .enumerate()
        .flat_map(|(i, w)| {
            VALIDATION_RHOS
                .iter()
                .map(move |&rho| expansion_residual(obj, w, rho, seed + i as u64).abs() / (c * rho * rho))
        })
        .fold(0.0, f64::max);
    (c, worst)
}

fn lemma2(seed: u64, report: &mut LemmaReport) {
    let q = quadratic(&[1.0, 10.0]);
    let points: Vec<ParamVector> = (0..TRIALS).map(|i| point(seed, i, 2, -1.0, 1.0)).collect();

    let (c, worst) = expansion_fit(&q, &points, seed);
    report.push(
        "lemma2",
        "expansion",
        c.is_finite() && worst <= 1.0,
        format!(
            "C = {c:.4} ({FIT_SLACK} x max fitted at rho = {FIT_RHO}); worst |U - L - rho|g|| / (C rho^2) at rho in {VALIDATION_RHOS:?} is {worst:.4} (must be <= 1)"
        ),
    );

    let origin = ParamVector::zeros(2);
    let stationary = VALIDATION_RHOS
        .iter()
        .chain([FIT_RHO].iter())
        .map(|&rho| expansion_residual(&q, &origin, rho, seed) / (c * rho * rho))
        .fold(0.0, f64::max);
    report.push(
        "lemma2",
        "stationary",
        stationary <= 1.0,
        format!("at g = 0, max (U - L) / (C rho^2) = {stationary:.4} (must be <= 1)"),
    );

    let (eta, rho) = (0.05, 0.05);
    let cfg = EeoConfig::builder().rho(rho).build().expect("valid config");
    let mut worst_change = f64::NEG_INFINITY;
    for (i, w) in points.iter().enumerate() {
        let g_sam = sam_gradient(&q, w, &cfg, &Batch::Full).expect("finite gradient");
        let w1 = w.add_scaled(-eta, &g_sam);
        let s = seed + i as u64;
        let before = robust_objective_estimate(&q, w, rho, 64, s).expect("valid radius");
        let after = robust_objective_estimate(&q, &w1, rho, 64, s).expect("valid radius");
        worst_change = worst_change.max(after - before);
    }
    report.push(
        "lemma2",
        "sam_descent",
        worst_change < 0.0,
        format!("largest change of sampled U_rho over one SAM step at {TRIALS} points: {worst_change:.3e} (must be < 0)"),
    );
}

/// `‖fd_hvp(α) − Hv‖` for each α in [`HVP_ALPHAS`].
pub fn hvp_errors(obj: &Landscape, w: &ParamVector, v: &ParamVector) -> Vec<f64> {
    let exact = obj.hessian(w).matmul(&Matrix::new(v.dim(), 1, v.as_slice().to_vec()).expect("column")).expect("shapes");
    HVP_ALPHAS
        .iter()
        .map(|&a| {
            let fd = fd_hvp(obj, w, v, a, &Batch::Full).expect("finite hvp");
            fd.as_slice()
                .iter()
                .zip(exact.as_slice())
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Error ratios `err(α/2)/err(α)` on the cubic over [`TRIALS`] seeded
/// `(w, v)` pairs.
pub fn cubic_ratios(seed: u64) -> Vec<f64> {
    let cubic = LandscapeSpec::Cubic { dim: 4 }.build().expect("valid cubic");
    (0..TRIALS)
        .flat_map(|i| {
            let w = point(seed, i, 4, -1.0, 1.0);
            let v = unit(seed, i, 4);
            let e = hvp_errors(&cubic, &w, &v);
            e.windows(2).map(|p| p[1] / p[0]).collect::<Vec<_>>()
        })
        .collect()
}

/// `Σ wᵢ⁴`; its gradient is cubic, so the central-difference HVP has a
/// genuine `α²` error term.
struct Quartic;

impl Objective for Quartic {
    fn dim(&self) -> usize {
        4
    }
    fn loss(&self, w: &ParamVector, _: &Batch) -> f64 {
        w.as_slice().iter().map(|x| x.powi(4)).sum()
    }
    fn grad(&self, w: &ParamVector, _: &Batch) -> ParamVector {
        ParamVector::from(w.as_slice().iter().map(|x| 4.0 * x.powi(3)).collect::<Vec<_>>())
    }
}

fn lemma3(seed: u64, report: &mut LemmaReport) {
    let ratios = cubic_ratios(seed);
    let (lo, hi) = RATIO_RANGE;
    let in_range = ratios.iter().filter(|r| (lo..=hi).contains(*r)).count();
    let (rmin, rmax) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
    report.push(
        "lemma3",
        "cubic_ratio",
        in_range == ratios.len(),
        format!(
            "{in_range}/{} halvings with err(a/2)/err(a) in [{lo}, {hi}] on sum w^3 (observed {rmin:.3e}..{rmax:.3e})",
            ratios.len()
        ),
    );

    let cubic = LandscapeSpec::Cubic { dim: 4 }.build().expect("valid cubic");
    let rho_h = cubic.meta().hessian_lipschitz.unwrap_or(6.0);
    let mut bound_ok = true;
    let mut max_err: f64 = 0.0;
    for i in 0..TRIALS {
        let (w, v) = (point(seed, i, 4, -1.0, 1.0), unit(seed, i, 4));
        for (e, a) in hvp_errors(&cubic, &w, &v).into_iter().zip(HVP_ALPHAS) {
            max_err = max_err.max(e);
            bound_ok &= e <= rho_h / 6.0 * a * a;
        }
    }
    report.push(
        "lemma3",
        "cubic_bound",
        bound_ok,
        format!("HVP error <= rho_H/6 * a^2 on the cubic (max error {max_err:.3e})"),
    );

    let mut worst_rel: f64 = 0.0;
    for i in 0..TRIALS {
        let mut rng = stream_rng(seed, Stream::Start, 100 + i as u64);
        let b = Matrix::new(4, 4, standard_normals(&mut rng, 16)).expect("finite");
        let a = b.add(&b.transpose()).expect("square");
        let q = LandscapeSpec::Quadratic { a: a.clone(), b: vec![0.0; 4] }.build().expect("symmetric");
        let (w, v) = (point(seed, i, 4, -2.0, 2.0), unit(seed, i, 4));
        let av = a.matmul(&Matrix::new(4, 1, v.as_slice().to_vec()).expect("column")).expect("shapes");
        for alpha in [1e-1, 1e-3, 1e-5] {
            let fd = fd_hvp(&q, &w, &v, alpha, &Batch::Full).expect("finite");
            let num: f64 = fd.as_slice().iter().zip(av.as_slice()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let den = av.frobenius_norm().max(1e-300);
            worst_rel = worst_rel.max(num / den);
        }
    }
    report.push(
        "lemma3",
        "quadratic_exact",
        worst_rel <= QUADRATIC_HVP_TOL,
        format!("max relative FD-HVP error on random quadratics {worst_rel:.3e} (must be <= {QUADRATIC_HVP_TOL:e})"),
    );

    let saddle = LandscapeSpec::Saddle.build().expect("valid");
    let kick = 0.1;
    let cfg = EeoConfig::builder()
        .rho(kick)
        .negcur_kick(1.0)
        .grad_trigger(0.01)
        .probe_iters(50)
        .seed(seed)
        .build()
        .expect("valid config");
    let mut kick_ok = true;
    let mut min_margin = f64::INFINITY;
    for i in 0..TRIALS {
        let w = point(seed, i, 2, -1e-3, 1e-3);
        let est = estimate_min_curvature(&saddle, &w, &cfg, &Batch::Full, i as u64).expect("finite");
        let (w1, fired) = negcur_escape(&saddle, &w, &est, &cfg, &Batch::Full).expect("finite");
        let gamma = -est.lambda;
        let decrease = saddle.loss_full(&w) - saddle.loss_full(&w1);
        let need = kick * kick * gamma / 4.0;
        kick_ok &= fired && decrease >= need;
        min_margin = min_margin.min(decrease - need);
    }
    report.push(
        "lemma3",
        "escape_decrease",
        kick_ok,
        format!("kick of length {kick} at near-critical saddle points decreases L by >= a^2 gamma/4 (min margin {min_margin:.3e})"),
    );

    let mut qr: Vec<f64> = Vec::new();
    for i in 0..TRIALS {
        let (w, v) = (point(seed, i, 4, -1.0, 1.0), unit(seed, i, 4));
        let exact: Vec<f64> = w.as_slice().iter().zip(v.as_slice()).map(|(x, y)| 12.0 * x * x * y).collect();
        let errs: Vec<f64> = HVP_ALPHAS
            .iter()
            .map(|&a| {
                let fd = fd_hvp(&Quartic, &w, &v, a, &Batch::Full).expect("finite");
                fd.as_slice().iter().zip(&exact).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
            })
            .collect();
        qr.extend(errs.windows(2).map(|p| p[1] / p[0]));
    }
    let mean = qr.iter().sum::<f64>() / qr.len() as f64;
    report.notes.push(format!(
        "on sum w^4 the same halvings give mean err(a/2)/err(a) = {mean:.4}; on sum w^3 the central difference of the quadratic gradient is exact, so the cubic error is rounding noise"
    ));
}

fn lemma4(seed: u64, report: &mut LemmaReport) {
    let q = quadratic(&[1.0, 4.0]);
    let (eta, rho, temp) = (0.01, 0.05, 1e-4);
    let smooth = 4.0;
    let dim = 2.0;
    let w0 = ParamVector::from(vec![1.0, 1.0]);
    let base = EeoConfig::builder()
        .eta(eta)
        .rho(rho)
        .temperature(temp)
        .temp_decay(1.0)
        .negcur_kick(0.0)
        .beta(0.0)
        .build()
        .expect("valid config");

    let sampler = RobustSampler::new(&q.grad_full(&w0), 64, seed);
    let u = |w: &ParamVector| sampler.estimate(&q, w, rho, &Batch::Full);
    let grad_u = sam_gradient(&q, &w0, &base, &Batch::Full).expect("finite");
    let bound = -eta * (1.0 - smooth * eta / 2.0) * grad_u.dot(&grad_u) * 0.5 + eta * temp * dim;

    let u0 = u(&w0);
    let mean_change = (0..LEMMA4_STEPS)
        .map(|t| {
            let cfg = base.to_builder().seed(seed.wrapping_add(t as u64)).build().expect("valid");
            let (s, _) = eeo_step(&q, EeoState::new(w0.clone(), &cfg), &cfg).expect("finite");
            u(&s.w) - u0
        })
        .sum::<f64>()
        / LEMMA4_STEPS as f64;
    report.push(
        "lemma4",
        "expected_descent",
        mean_change <= bound,
        format!("mean one-step change of U_rho over {LEMMA4_STEPS} noisy steps {mean_change:.4e} <= bound {bound:.4e}"),
    );

    let noiseless = base.to_builder().temperature(0.0).seed(seed).build().expect("valid");
    let mut state = EeoState::new(w0.clone(), &noiseless);
    let mut strict = true;
    let mut prev = u(&state.w);
    for _ in 0..LEMMA4_STEPS {
        state = eeo_step(&q, state, &noiseless).expect("finite").0;
        let now = u(&state.w);
        strict &= now < prev;
        prev = now;
    }
    report.push(
        "lemma4",
        "noiseless_descent",
        strict,
        format!("with T = 0, sampled U_rho strictly decreases on all {LEMMA4_STEPS} steps"),
    );
}
