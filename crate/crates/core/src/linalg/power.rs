use super::LinalgError;
use crate::rng::{standard_normals, stream_rng, Stream};

/// Rayleigh quotient and the unit vector it was measured at.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub vector: Vec<f64>,
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Power iteration from a seeded Gaussian start vector.
///
/// Performs exactly `iters` applications of `apply`. The returned pair
/// satisfies `lambda = vᵀ·apply(v)` for the returned `v`. If the start
/// vector has a Rayleigh quotient of exactly zero it is redrawn once.
pub fn power_iteration<E>(
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>, E>,
    dim: usize,
    iters: usize,
    seed: u64,
) -> Result<EigenPair, E>
where
    E: From<LinalgError>,
{
    if dim == 0 || iters == 0 {
        return Err(LinalgError::Degenerate("power iteration needs dim >= 1 and iters >= 1").into());
    }
    let mut start = draw_unit(seed, 0, dim);
    let first = checked_apply(&mut apply, &start)?;
    if dot(&start, &first) == 0.0 {
        start = draw_unit(seed, 1, dim);
        let again = checked_apply(&mut apply, &start)?;
        iterate(&mut apply, start, again, iters)
    } else {
        iterate(&mut apply, start, first, iters)
    }
}

/// Power iteration from a caller-provided start vector (normalised here).
pub fn power_iteration_from<E>(
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>, E>,
    mut start: Vec<f64>,
    iters: usize,
) -> Result<EigenPair, E>
where
    E: From<LinalgError>,
{
    if iters == 0 || normalize(&mut start) == 0.0 {
        return Err(LinalgError::Degenerate("power iteration needs a nonzero start and iters >= 1").into());
    }
    let first = checked_apply(&mut apply, &start)?;
    iterate(&mut apply, start, first, iters)
}

fn draw_unit(seed: u64, attempt: u64, dim: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Power, attempt);
    loop {
        let mut v = standard_normals(&mut rng, dim);
        if normalize(&mut v) > 0.0 {
            return v;
        }
    }
}

fn checked_apply<E: From<LinalgError>>(
    apply: &mut impl FnMut(&[f64]) -> Result<Vec<f64>, E>,
    v: &[f64],
) -> Result<Vec<f64>, E> {
    let out = apply(v)?;
    if out.len() != v.len() {
        return Err(LinalgError::Shape {
            op: "power_iteration",
            left: (v.len(), 1),
            right: (out.len(), 1),
        }
        .into());
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::Numeric("operator returned a non-finite vector".into()).into());
    }
    Ok(out)
}

/// `v` is unit and `image = apply(v)` has already been computed once.
fn iterate<E: From<LinalgError>>(
    apply: &mut impl FnMut(&[f64]) -> Result<Vec<f64>, E>,
    mut v: Vec<f64>,
    mut image: Vec<f64>,
    iters: usize,
) -> Result<EigenPair, E> {
    for _ in 1..iters {
        let mut next = image;
        if normalize(&mut next) == 0.0 {
            // v lies in the null space; it is already an eigenvector.
            return Ok(EigenPair { lambda: 0.0, vector: v });
        }
        v = next;
        image = checked_apply(apply, &v)?;
    }
    Ok(EigenPair {
        lambda: dot(&v, &image),
        vector: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &'static [f64]) -> impl FnMut(&[f64]) -> Result<Vec<f64>, LinalgError> {
        move |v: &[f64]| Ok(v.iter().zip(d).map(|(x, s)| x * s).collect())
    }

    #[test]
    fn dominant_negative_eigenvalue() {
        let pair = power_iteration(diag(&[2.0, -5.0]), 2, 100, 3).unwrap();
        assert!((pair.lambda + 5.0).abs() < 1e-6);
        assert!((pair.vector[1].abs() - 1.0).abs() < 1e-6);
        assert!(pair.vector[0].abs() < 1e-6);
    }

    #[test]
    fn isotropic_operator_one_iteration() {
        for seed in 0..5 {
            let pair =
                power_iteration(|v: &[f64]| Ok::<_, LinalgError>(v.iter().map(|x| 2.5 * x).collect()), 4, 1, seed)
                    .unwrap();
            assert!((pair.lambda - 2.5).abs() < 1e-14);
            let n: f64 = pair.vector.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn convergence_rate_is_eigenvalue_ratio() {
        // tan of the angle to e1 shrinks by exactly 1/3 per iteration for diag(3, 1).
        let tan = |iters| {
            let p = power_iteration(diag(&[3.0, 1.0]), 2, iters, 11).unwrap();
            (p.vector[1] / p.vector[0]).abs()
        };
        for k in 1..8 {
            let ratio = tan(k + 1) / tan(k);
            assert!((ratio - 1.0 / 3.0).abs() < 1e-9, "k={k} ratio={ratio}");
        }
    }

    #[test]
    fn non_finite_operator_is_an_error() {
        let err = power_iteration(|v: &[f64]| Ok::<_, LinalgError>(vec![f64::NAN; v.len()]), 3, 5, 0)
            .unwrap_err();
        assert!(matches!(err, LinalgError::Numeric(_)));
    }

    #[test]
    fn deterministic_given_seed() {
        let a = power_iteration(diag(&[1.0, 2.0]), 2, 3, 9).unwrap();
        let b = power_iteration(diag(&[1.0, 2.0]), 2, 3, 9).unwrap();
        assert_eq!(a, b);
    }
}
