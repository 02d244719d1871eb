//! Analytic test landscapes.

use super::{Batch, Objective, ObjectiveError, ObjectiveMeta, ParamVector};
use crate::linalg::{spectral_norm, Matrix};
use crate::rng::{standard_normals, stream_rng, Stream};

/// Parameters of the one-dimensional two-well landscape
///
/// `L(x) = ½·bowl·(x + 1)² − depth·exp(−(x − 1)² / (2·width²))`.
///
/// The bowl gives a wide well at `x = −1` with `L = 0` and curvature `bowl`.
/// The Gaussian carves a narrow well near `x = +1` that is deeper
/// (`L ≈ 2·bowl − depth`) but has curvature of order `depth / width²`,
/// separated from the wide well by a barrier a few widths to its left.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoWellParams {
    pub bowl: f64,
    pub depth: f64,
    pub width: f64,
}

impl Default for TwoWellParams {
    fn default() -> Self {
        Self {
            bowl: 1.0,
            depth: 2.3,
            width: 0.015,
        }
    }
}

/// Which well of the two-well landscape a point drains into under gradient flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basin {
    Flat,
    Sharp,
}

/// Description of a built-in landscape.
#[derive(Clone, Debug, PartialEq)]
pub enum LandscapeSpec {
    /// `½ wᵀAw + bᵀw` with symmetric `A`.
    Quadratic { a: Matrix, b: Vec<f64> },
    /// `x² − y²`, a strict saddle at the origin.
    Saddle,
    /// `Σ wᵢ³`.
    Cubic { dim: usize },
    TwoWell(TwoWellParams),
    /// Least squares `‖XW − Y‖²_F / n` with `Y = X·W_toy + σ·ε`.
    ToyLinear {
        n: usize,
        lookback: usize,
        horizon: usize,
        sigma: f64,
        seed: u64,
    },
}

impl LandscapeSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadratic { .. } => "quadratic",
            Self::Saddle => "saddle",
            Self::Cubic { .. } => "cubic",
            Self::TwoWell(_) => "two_well",
            Self::ToyLinear { .. } => "toy_linear",
        }
    }

    pub fn build(&self) -> Result<Landscape, ObjectiveError> {
        let invalid = |msg: String| Err(ObjectiveError::Validation(msg));
        match self {
            Self::Quadratic { a, b } => {
                if a.rows() != a.cols() {
                    return invalid(format!("A must be square, got {}x{}", a.rows(), a.cols()));
                }
                if b.len() != a.rows() {
                    return invalid(format!("b has length {}, expected {}", b.len(), a.rows()));
                }
                let n = a.rows();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * (1.0 + a[(i, j)].abs()) {
                            return invalid(format!("A is not symmetric at ({i}, {j})"));
                        }
                    }
                }
                if b.iter().any(|x| !x.is_finite()) {
                    return invalid("b must be finite".into());
                }
                let smoothness = spectral_norm(a)?;
                Ok(Landscape::Quadratic(Quadratic {
                    a: a.clone(),
                    b: b.clone(),
                    smoothness,
                }))
            }
            Self::Saddle => Ok(Landscape::Saddle),
            Self::Cubic { dim } => {
                if *dim == 0 {
                    return invalid("cubic needs dim >= 1".into());
                }
                Ok(Landscape::Cubic { dim: *dim })
            }
            Self::TwoWell(p) => {
                if !(p.bowl > 0.0 && p.depth >= 0.0 && p.width > 0.0) {
                    return invalid(format!("two_well needs bowl > 0, depth >= 0, width > 0: {p:?}"));
                }
                Ok(Landscape::TwoWell(*p))
            }
            Self::ToyLinear {
                n,
                lookback,
                horizon,
                sigma,
                seed,
            } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return invalid(format!("sigma must be >= 0, got {sigma}"));
                }
                if *n == 0 || *lookback == 0 || *horizon == 0 {
                    return invalid("toy_linear needs n, lookback, horizon >= 1".into());
                }
                Ok(Landscape::ToyLinear(ToyLinear::generate(
                    *n, *lookback, *horizon, *sigma, *seed,
                )?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    a: Matrix,
    b: Vec<f64>,
    smoothness: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyLinear {
    x: Matrix,
    y: Matrix,
    w_toy: Matrix,
    smoothness: f64,
}

impl ToyLinear {
    fn generate(
        n: usize,
        lookback: usize,
        horizon: usize,
        sigma: f64,
        seed: u64,
    ) -> Result<Self, ObjectiveError> {
        let mut rng = stream_rng(seed, Stream::Data, 0);
        let x = Matrix::new(n, lookback, standard_normals(&mut rng, n * lookback))?;
        let w_toy = Matrix::new(lookback, horizon, standard_normals(&mut rng, lookback * horizon))?;
        let noise = Matrix::new(n, horizon, standard_normals(&mut rng, n * horizon))?;
        let y = x.matmul(&w_toy)?.add(&noise.scale(sigma))?;
        let smoothness = 2.0 * spectral_norm(&x.t_matmul(&x)?)? / n as f64;
        Ok(Self {
            x,
            y,
            w_toy,
            smoothness,
        })
    }

    pub fn w_toy(&self) -> &Matrix {
        &self.w_toy
    }

    fn weights(&self, w: &ParamVector) -> Matrix {
        Matrix::new(self.w_toy.rows(), self.w_toy.cols(), w.as_slice().to_vec())
            .unwrap_or_else(|_| Matrix::from_fn(self.w_toy.rows(), self.w_toy.cols(), |_, _| f64::NAN))
    }

    fn residual(&self, w: &ParamVector) -> Matrix {
        let wm = self.weights(w);
        let pred = self.x.matmul(&wm).unwrap_or_else(|_| wm.clone());
        Matrix::from_fn(self.y.rows(), self.y.cols(), |i, j| pred[(i, j)] - self.y[(i, j)])
    }
}

/// A built landscape; implements [`Objective`] with analytic derivatives.
#[derive(Clone, Debug, PartialEq)]
pub enum Landscape {
    Quadratic(Quadratic),
    Saddle,
    Cubic { dim: usize },
    TwoWell(TwoWellParams),
    ToyLinear(ToyLinear),
}

impl Landscape {
    /// Analytic Hessian at `w`.
    pub fn hessian(&self, w: &ParamVector) -> Matrix {
        match self {
            Self::Quadratic(q) => q.a.clone(),
            Self::Saddle => Matrix::from_diag(&[2.0, -2.0]),
            Self::Cubic { .. } => Matrix::from_diag(&w.as_slice().iter().map(|x| 6.0 * x).collect::<Vec<_>>()),
            Self::TwoWell(p) => {
                let x = w[0];
                let u = x - 1.0;
                let s2 = p.width * p.width;
                let e = (-u * u / (2.0 * s2)).exp();
                Matrix::from_diag(&[p.bowl + p.depth / s2 * (1.0 - u * u / s2) * e])
            }
            Self::ToyLinear(t) => {
                let n = t.x.rows() as f64;
                let gram = t.x.t_matmul(&t.x).expect("conformable");
                let (l, h) = (t.w_toy.rows(), t.w_toy.cols());
                Matrix::from_fn(l * h, l * h, |r, c| {
                    let (i, hi) = (r / h, r % h);
                    let (j, hj) = (c / h, c % h);
                    if hi == hj {
                        2.0 * gram[(i, j)] / n
                    } else {
                        0.0
                    }
                })
            }
        }
    }

    pub fn as_toy_linear(&self) -> Option<&ToyLinear> {
        match self {
            Self::ToyLinear(t) => Some(t),
            _ => None,
        }
    }

    /// Location of the barrier between the two wells, found by bisection on
    /// the gradient. `None` for other landscapes.
    pub fn two_well_barrier(&self) -> Option<f64> {
        let Self::TwoWell(_) = self else { return None };
        let g = |x: f64| self.grad_full(&ParamVector::from(vec![x]))[0];
        // g > 0 just right of the wide well, g < 0 just left of the narrow one.
        let (mut lo, mut hi) = (-0.5, 1.0 - 0.5 * self.two_well_params()?.width);
        if g(lo) <= 0.0 || g(hi) >= 0.0 {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    fn two_well_params(&self) -> Option<TwoWellParams> {
        match self {
            Self::TwoWell(p) => Some(*p),
            _ => None,
        }
    }

    /// Which well of the two-well landscape `x` drains into.
    pub fn two_well_basin(&self, x: f64) -> Option<Basin> {
        let barrier = self.two_well_barrier()?;
        Some(if x < barrier { Basin::Flat } else { Basin::Sharp })
    }
}

impl Objective for Landscape {
    fn dim(&self) -> usize {
        match self {
            Self::Quadratic(q) => q.b.len(),
            Self::Saddle => 2,
            Self::Cubic { dim } => *dim,
            Self::TwoWell(_) => 1,
            Self::ToyLinear(t) => t.w_toy.rows() * t.w_toy.cols(),
        }
    }

    fn loss(&self, param: &ParamVector, _batch: &Batch) -> f64 {
        let w = param.as_slice();
        match self {
            Self::Quadratic(q) => {
                let n = q.b.len();
                let mut quad = 0.0;
                for i in 0..n {
                    let row: f64 = (0..n).map(|j| q.a[(i, j)] * w[j]).sum();
                    quad += w[i] * row;
                }
                0.5 * quad + q.b.iter().zip(w).map(|(b, x)| b * x).sum::<f64>()
            }
            Self::Saddle => w[0] * w[0] - w[1] * w[1],
            Self::Cubic { .. } => w.iter().map(|x| x * x * x).sum(),
            Self::TwoWell(p) => {
                let x = w[0];
                let u = x - 1.0;
                0.5 * p.bowl * (x + 1.0).powi(2) - p.depth * (-u * u / (2.0 * p.width * p.width)).exp()
            }
            Self::ToyLinear(t) => {
                t.residual(param).sum_squares() / t.x.rows() as f64
            }
        }
    }

    fn grad(&self, w: &ParamVector, _batch: &Batch) -> ParamVector {
        let v = w.as_slice();
        let g = match self {
            Self::Quadratic(q) => {
                let n = q.b.len();
                (0..n)
                    .map(|i| (0..n).map(|j| q.a[(i, j)] * v[j]).sum::<f64>() + q.b[i])
                    .collect()
            }
            Self::Saddle => vec![2.0 * v[0], -2.0 * v[1]],
            Self::Cubic { .. } => v.iter().map(|x| 3.0 * x * x).collect(),
            Self::TwoWell(p) => {
                let x = v[0];
                let u = x - 1.0;
                let s2 = p.width * p.width;
                vec![p.bowl * (x + 1.0) + p.depth * u / s2 * (-u * u / (2.0 * s2)).exp()]
            }
            Self::ToyLinear(t) => {
                let r = t.residual(w);
                let n = t.x.rows() as f64;
                t.x.t_matmul(&r)
                    .map(|m| m.scale(2.0 / n).into_vec())
                    .unwrap_or_else(|_| vec![f64::NAN; v.len()])
            }
        };
        ParamVector(g)
    }

    fn meta(&self) -> ObjectiveMeta {
        match self {
            Self::Quadratic(q) => ObjectiveMeta {
                smoothness: Some(q.smoothness),
                hessian_lipschitz: Some(0.0),
            },
            Self::Saddle => ObjectiveMeta {
                smoothness: Some(2.0),
                hessian_lipschitz: Some(0.0),
            },
            Self::Cubic { .. } => ObjectiveMeta {
                smoothness: None,
                hessian_lipschitz: Some(6.0),
            },
            Self::TwoWell(p) => ObjectiveMeta {
                smoothness: Some(p.bowl + p.depth / (p.width * p.width)),
                hessian_lipschitz: None,
            },
            Self::ToyLinear(t) => ObjectiveMeta {
                smoothness: Some(t.smoothness),
                hessian_lipschitz: Some(0.0),
            },
        }
    }
}
