//! Sampled estimate of the robust neighbourhood objective
//! `U_ρ(w) = max_{‖δ‖ ≤ ρ} L(w + δ)`.

use super::{Batch, Objective, ObjectiveError, ParamVector};
use crate::rng::{standard_normals, stream_rng, Stream};

/// Fixed set of probe directions for estimating `U_ρ`.
///
/// Half of the directions are uniform on the unit sphere (seeded); the other
/// half are structured: `±g/‖g‖` followed by the signed coordinate axes.
/// If the structured list runs out, the remainder is filled with more
/// random directions.
#[derive(Clone, Debug)]
pub struct RobustSampler {
    directions: Vec<ParamVector>,
}

impl RobustSampler {
    pub fn new(grad: &ParamVector, n_samples: usize, seed: u64) -> Self {
        let dim = grad.dim();
        let n_random = n_samples / 2;
        let n_structured = n_samples - n_random;

        let mut structured = Vec::with_capacity(n_structured);
        let gn = grad.norm();
        if gn > 0.0 {
            let u = grad.scale(1.0 / gn);
            structured.push(u.scale(-1.0));
            structured.push(u);
        }
        for i in 0..dim {
            structured.push(ParamVector::basis(dim, i));
            structured.push(ParamVector::basis(dim, i).scale(-1.0));
        }
        structured.truncate(n_structured);

        let mut rng = stream_rng(seed, Stream::Robust, 0);
        let n_draw = n_samples - structured.len();
        let mut directions: Vec<ParamVector> = (0..n_draw)
            .map(|_| loop {
                let z = ParamVector(standard_normals(&mut rng, dim));
                let n = z.norm();
                if n > 0.0 {
                    break z.scale(1.0 / n);
                }
            })
            .collect();
        directions.extend(structured);
        Self { directions }
    }

    pub fn directions(&self) -> &[ParamVector] {
        &self.directions
    }

    /// `max({L(w)} ∪ {L(w + ρ·u)})` over the stored directions.
    pub fn estimate<O: Objective + ?Sized>(&self, obj: &O, w: &ParamVector, rho: f64, batch: &Batch) -> f64 {
        let base = obj.loss(w, batch);
        if rho == 0.0 {
            return base;
        }
        self.directions
            .iter()
            .map(|u| obj.loss(&w.add_scaled(rho, u), batch))
            .fold(base, f64::max)
    }
}

/// Sampled `U_ρ(w)` on the full batch with `n_samples` probe directions.
pub fn robust_objective_estimate<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    rho: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64, ObjectiveError> {
    if rho.is_nan() || rho < 0.0 || n_samples == 0 {
        return Err(ObjectiveError::Validation(format!(
            "robust estimate needs rho >= 0 and n_samples >= 1 (rho={rho}, n={n_samples})"
        )));
    }
    if rho == 0.0 {
        return Ok(obj.loss_full(w));
    }
    let g = obj.grad_full(w);
    Ok(RobustSampler::new(&g, n_samples, seed).estimate(obj, w, rho, &Batch::Full))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::objective::LandscapeSpec;
    use crate::rng::uniforms;
    use proptest::prelude::*;

    fn quad(diag: &[f64]) -> crate::objective::Landscape {
        LandscapeSpec::Quadratic {
            a: Matrix::from_diag(diag),
            b: vec![0.0; diag.len()],
        }
        .build()
        .unwrap()
    }

    #[test]
    fn zero_radius_is_the_loss() {
        let q = quad(&[1.0, 10.0]);
        let w = ParamVector::from(vec![0.3, -0.2]);
        assert_eq!(robust_objective_estimate(&q, &w, 0.0, 16, 1).unwrap(), q.loss_full(&w));
    }

    #[test]
    fn unit_sphere_maximum_of_isotropic_quadratic() {
        // max of ½‖δ‖² over the unit sphere is ½, attained in every direction.
        let q = quad(&[1.0, 1.0, 1.0]);
        let est = robust_objective_estimate(&q, &ParamVector::zeros(3), 1.0, 64, 2).unwrap();
        assert!((est - 0.5).abs() < 1e-12);
    }

    #[test]
    fn first_order_expansion() {
        // (U_ρ − L)/ρ → ‖g‖ as ρ → 0.
        let q = quad(&[1.0, 10.0]);
        let w = ParamVector::from(vec![0.8, -0.3]);
        let g = q.grad_full(&w).norm();
        let l = q.loss_full(&w);
        for rho in [1e-2, 1e-3] {
            let u = robust_objective_estimate(&q, &w, rho, 256, 3).unwrap();
            let ratio = (u - l) / (rho * g);
            assert!((ratio - 1.0).abs() < 10.0 * rho, "rho={rho}: {ratio}");
        }
    }

    #[test]
    fn never_below_the_loss() {
        let q = quad(&[-1.0, 2.0]);
        let w = ParamVector::from(vec![0.1, 0.1]);
        assert!(robust_objective_estimate(&q, &w, 0.3, 8, 0).unwrap() >= q.loss_full(&w));
    }

    proptest! {
        #[test]
        fn monotone_in_radius_for_convex(seed in 0u64..1000, r1 in 0.0f64..1.0, dr in 0.0f64..1.0) {
            let q = quad(&[1.0, 3.0, 0.5]);
            let mut rng = stream_rng(seed, Stream::Start, 0);
            let w = ParamVector::from(uniforms(&mut rng, 3, -2.0, 2.0));
            let sampler = RobustSampler::new(&q.grad_full(&w), 32, seed);
            let a = sampler.estimate(&q, &w, r1, &Batch::Full);
            let b = sampler.estimate(&q, &w, r1 + dr, &Batch::Full);
            prop_assert!(a <= b + 1e-12 * (1.0 + b.abs()));
        }
    }
}
