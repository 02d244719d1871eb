//! Escape-explore optimization for small attention models.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense matrices, row softmax, singular values, effective rank
//!   and power iteration.
//! * [`objective`]: the differentiable objective contract, finite-difference
//!   gradient and Hessian-vector oracles, a sampled robust-neighbourhood
//!   estimate, and analytic test landscapes.
//! * [`optimizer`]: the escape-explore optimizer. A sharpness-aware outer
//!   update, a negative-curvature escape kick, Langevin noise and an
//!   exponential moving average of the iterates.
//! * [`transformer`]: a single-head channel-attention encoder with
//!   hand-derived gradients, exposed as an [`objective::Objective`].
//! * [`diagnostics`]: effective rank, nuclear norm and attention entropy
//!   tracking with CSV export.
//!
//! ```
//! use eeo_core::objective::{LandscapeSpec, Objective};
//! use eeo_core::optimizer::{run, EeoConfig};
//! use eeo_core::objective::ParamVector;
//!
//! let saddle = LandscapeSpec::Saddle.build().unwrap();
//! let cfg = EeoConfig::builder().eta(0.01).negcur_kick(2.0).max_steps(500).seed(3).build().unwrap();
//! let out = run(&saddle, ParamVector::from(vec![1e-3, 0.0]), &cfg).unwrap();
//! assert!(saddle.loss_full(&out.final_params) < -0.5);
//! ```

pub mod diagnostics;
pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod rng;
pub mod transformer;

/// Formats a float as the shortest decimal that parses back to the same
/// value, switching to exponent notation for very small or large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/linalg.md")]
    mod linalg {}
    #[doc = include_str!("../../../book/src/objectives.md")]
    mod objectives {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
    #[doc = include_str!("../../../book/src/transformer.md")]
    mod transformer {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
}
