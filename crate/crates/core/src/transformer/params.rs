use super::TransformerError;
use crate::linalg::Matrix;
use crate::objective::ParamVector;
use crate::rng::{stream_rng, uniforms, Stream};

/// Sizes of the forecasting model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelShape {
    /// Number of variables `D`.
    pub vars: usize,
    /// Lookback `L`.
    pub lookback: usize,
    /// Horizon `H`.
    pub horizon: usize,
    pub patch_len: usize,
    /// Token width `d`.
    pub d: usize,
    /// Query/key width `d_m`.
    pub d_m: usize,
    /// Output width of the last layer.
    pub d_out: usize,
    pub layers: usize,
    /// Flattened image patch length, when an image projection is carried.
    pub img_patch_in: Option<usize>,
}

impl ModelShape {
    /// Channel attention: one token per variable.
    pub fn channel(vars: usize, lookback: usize, horizon: usize, d: usize) -> Self {
        Self {
            vars,
            lookback,
            horizon,
            patch_len: lookback,
            d,
            d_m: d,
            d_out: d,
            layers: 1,
            img_patch_in: None,
        }
    }

    pub fn validate(&self) -> Result<(), TransformerError> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("vars", self.vars),
            ("lookback", self.lookback),
            ("horizon", self.horizon),
            ("patch_len", self.patch_len),
            ("d", self.d),
            ("d_m", self.d_m),
            ("d_out", self.d_out),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be >= 1"));
            }
        }
        if !(1..=4).contains(&self.layers) {
            problems.push(format!("layers must be in 1..=4, got {}", self.layers));
        }
        if self.patch_len > 0 && !self.lookback.is_multiple_of(self.patch_len) {
            problems.push(format!(
                "lookback {} is not a multiple of patch_len {}",
                self.lookback, self.patch_len
            ));
        }
        if self.img_patch_in == Some(0) {
            problems.push("img_patch_in must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(TransformerError::Config(problems.join("; ")))
        }
    }

    /// Patches per variable.
    pub fn patches_per_var(&self) -> usize {
        self.lookback / self.patch_len
    }

    /// Tokens per window.
    pub fn tokens(&self) -> usize {
        self.vars * self.patches_per_var()
    }

    fn layer_out(&self, i: usize) -> usize {
        if i + 1 == self.layers {
            self.d_out
        } else {
            self.d
        }
    }

    /// `(rows, cols)` of every parameter block in flattening order.
    fn blocks(&self) -> Vec<(usize, usize)> {
        let mut b = vec![(self.patch_len, self.d)];
        if let Some(n) = self.img_patch_in {
            b.push((n, self.d));
        }
        for i in 0..self.layers {
            b.extend([(self.d, self.d_m), (self.d, self.d_m), (self.d, self.d), (self.d, self.layer_out(i))]);
        }
        b.push((self.patches_per_var() * self.d_out, self.horizon));
        b
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|(r, c)| r * c).sum()
    }
}

/// Weights of one attention layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub w_o: Matrix,
}

/// All model weights. Flattened as `phi_ts`, `phi_img` (if any), each
/// layer's `W_q, W_k, W_v, W_o`, then the head, each block row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub phi_ts: Matrix,
    pub phi_img: Option<Matrix>,
    layers: Vec<LayerParams>,
    /// `(P·d_out)×H`, shared across variables.
    pub head: Matrix,
}

impl ModelParams {
    /// I.i.d. uniform in `[−1/√d, 1/√d]`.
    pub fn init(shape: &ModelShape, seed: u64) -> Result<Self, TransformerError> {
        shape.validate()?;
        let bound = 1.0 / (shape.d as f64).sqrt();
        let mut rng = stream_rng(seed, Stream::Init, 0);
        let flat = uniforms(&mut rng, shape.param_count(), -bound, bound);
        Self::unflatten(shape, &ParamVector::from(flat))
    }

    pub fn zeros(shape: &ModelShape) -> Result<Self, TransformerError> {
        shape.validate()?;
        Self::unflatten(shape, &ParamVector::zeros(shape.param_count()))
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    fn blocks(&self) -> Vec<&Matrix> {
        let mut b = vec![&self.phi_ts];
        b.extend(self.phi_img.as_ref());
        for l in &self.layers {
            b.extend([&l.w_q, &l.w_k, &l.w_v, &l.w_o]);
        }
        b.push(&self.head);
        b
    }

    pub fn flatten(&self) -> ParamVector {
        let mut out = Vec::new();
        for m in self.blocks() {
            out.extend_from_slice(m.as_slice());
        }
        ParamVector::from(out)
    }

    pub fn unflatten(shape: &ModelShape, w: &ParamVector) -> Result<Self, TransformerError> {
        shape.validate()?;
        let want = shape.param_count();
        if w.dim() != want {
            return Err(TransformerError::Config(format!(
                "parameter vector has {} entries, model needs {want}",
                w.dim()
            )));
        }
        let mut rest = w.as_slice();
        let mut mats = Vec::new();
        for (r, c) in shape.blocks() {
            let (head, tail) = rest.split_at(r * c);
            mats.push(Matrix::new(r, c, head.to_vec())?);
            rest = tail;
        }
        let mut it = mats.into_iter();
        let mut next = || it.next().expect("block count matches shape");
        let phi_ts = next();
        let phi_img = shape.img_patch_in.map(|_| next());
        let layers = (0..shape.layers)
            .map(|_| LayerParams {
                w_q: next(),
                w_k: next(),
                w_v: next(),
                w_o: next(),
            })
            .collect();
        let head = next();
        Ok(Self {
            phi_ts,
            phi_img,
            layers,
            head,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shape_validation() {
        let mut s = ModelShape::channel(3, 8, 2, 4);
        assert!(s.validate().is_ok());
        s.layers = 5;
        s.patch_len = 3;
        let msg = s.validate().unwrap_err().to_string();
        assert!(msg.contains("layers") && msg.contains("patch_len"), "{msg}");
    }

    #[test]
    fn param_count_and_init_range() {
        let s = ModelShape {
            layers: 2,
            d_out: 3,
            patch_len: 4,
            img_patch_in: Some(12),
            ..ModelShape::channel(2, 8, 3, 5)
        };
        // phi_ts 4x5, phi_img 12x5, layer0 5x5*2+5x5+5x5, layer1 ...+5x3, head (2*3)x3.
        let want = 20 + 60 + (25 * 4) + (25 * 3 + 15) + 18;
        assert_eq!(s.param_count(), want);
        let p = ModelParams::init(&s, 1).unwrap();
        assert_eq!(p.layers()[1].w_o.shape(), (5, 3));
        assert_eq!(p.head.shape(), (6, 3));
        let b = 1.0 / 5f64.sqrt();
        assert!(p.flatten().as_slice().iter().all(|x| x.abs() <= b));
        assert_eq!(p, ModelParams::init(&s, 1).unwrap());
        assert_ne!(p, ModelParams::init(&s, 2).unwrap());
    }

    #[test]
    fn wrong_length_is_rejected() {
        let s = ModelShape::channel(1, 4, 1, 2);
        assert!(ModelParams::unflatten(&s, &ParamVector::zeros(3)).is_err());
    }

    proptest! {
        #[test]
        fn flatten_round_trip(seed in 0u64..500, layers in 1usize..=4, img in any::<bool>()) {
            let s = ModelShape {
                layers,
                d_m: 3,
                d_out: 2,
                patch_len: 3,
                img_patch_in: img.then_some(4),
                ..ModelShape::channel(2, 6, 2, 4)
            };
            let p = ModelParams::init(&s, seed).unwrap();
            let flat = p.flatten();
            prop_assert_eq!(flat.dim(), s.param_count());
            let back = ModelParams::unflatten(&s, &flat).unwrap();
            prop_assert_eq!(&back, &p);
            prop_assert_eq!(back.flatten(), flat);
        }
    }
}
