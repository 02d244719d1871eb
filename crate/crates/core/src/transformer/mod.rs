//! A single-head attention encoder small enough to differentiate by hand.
//!
//! Each layer computes `f(Z) = [Z + A(Z)·Z·W_v]·W_o` with
//! `A(Z) = softmax(Z·W_q·(Z·W_k)ᵀ / √d_m)`. There is no MLP block, no
//! normalisation and no positional encoding. Tokenising a series with
//! `patch_len = L` gives one token per variable (channel attention).

mod model;
mod params;

pub use model::{ModelObjective, Task, Window, TEACHER_SCALE};
pub use params::{LayerParams, ModelParams, ModelShape};

use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformerError {
    #[error("series length {len} is not a multiple of patch_len {patch_len}; left-pad the series before tokenising")]
    PatchLength { len: usize, patch_len: usize },
    #[error("image {h}x{w} is not divisible into {patch}x{patch} patches")]
    ImagePatch { h: usize, w: usize, patch: usize },
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A multivariate series, one row per variable.
#[derive(Clone, Debug, PartialEq)]
pub struct TsInput {
    values: Matrix,
}

impl TsInput {
    pub fn new(values: Matrix) -> Self {
        Self { values }
    }

    pub fn vars(&self) -> usize {
        self.values.rows()
    }

    pub fn len(&self) -> usize {
        self.values.cols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }
}

/// A `C×H×W` image stored channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ImgInput {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImgInput {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self, TransformerError> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(TransformerError::Config("image dimensions must be positive".into()));
        }
        if data.len() != channels * height * width {
            return Err(TransformerError::Config(format!(
                "{channels}x{height}x{width} image needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(TransformerError::Config(format!("non-finite pixel at flat index {i}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `N×d` token embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenMatrix {
    z: Matrix,
}

impl TokenMatrix {
    pub fn new(z: Matrix) -> Self {
        Self { z }
    }

    pub fn count(&self) -> usize {
        self.z.rows()
    }

    pub fn dim(&self) -> usize {
        self.z.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.z
    }

    pub fn into_matrix(self) -> Matrix {
        self.z
    }
}

/// Splits every variable's series into `L / patch_len` contiguous patches.
///
/// Row `v·P + p` of the result holds patch `p` of variable `v`.
pub fn patch_matrix(x: &TsInput, patch_len: usize) -> Result<Matrix, TransformerError> {
    let len = x.len();
    if patch_len == 0 || !len.is_multiple_of(patch_len) {
        return Err(TransformerError::PatchLength { len, patch_len });
    }
    let per_var = len / patch_len;
    let vals = x.values();
    Ok(Matrix::from_fn(x.vars() * per_var, patch_len, |r, c| {
        let (v, p) = (r / per_var, r % per_var);
        vals[(v, p * patch_len + c)]
    }))
}

/// Patches the series and projects each patch with `phi_ts` (`patch_len×d`).
pub fn tokenize_ts(x: &TsInput, patch_len: usize, phi_ts: &Matrix) -> Result<TokenMatrix, TransformerError> {
    let patches = patch_matrix(x, patch_len)?;
    Ok(TokenMatrix::new(patches.matmul(phi_ts)?))
}

/// Flattens each `C×patch×patch` block (channel, then row, then column) and
/// projects it with `phi_img`. Blocks are visited in row-major order.
pub fn patch_embed_img(x: &ImgInput, patch: usize, phi_img: &Matrix) -> Result<TokenMatrix, TransformerError> {
    let (c, h, w) = x.dims();
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(TransformerError::ImagePatch { h, w, patch });
    }
    let (bh, bw) = (h / patch, w / patch);
    let flat = Matrix::from_fn(bh * bw, c * patch * patch, |r, k| {
        let (by, bx) = (r / bw, r % bw);
        let ch = k / (patch * patch);
        let (py, px) = ((k / patch) % patch, k % patch);
        x.get(ch, by * patch + py, bx * patch + px)
    });
    Ok(TokenMatrix::new(flat.matmul(phi_img)?))
}

/// `softmax(Z·W_q·(Z·W_k)ᵀ / √d_m)`, row-stochastic.
pub fn attention_matrix(z: &Matrix, w_q: &Matrix, w_k: &Matrix) -> Result<Matrix, TransformerError> {
    if w_q.shape() != w_k.shape() {
        return Err(LinalgError::Shape {
            op: "attention_matrix",
            left: w_q.shape(),
            right: w_k.shape(),
        }
        .into());
    }
    let q = z.matmul(w_q)?;
    let k = z.matmul(w_k)?;
    let scores = q.matmul_t(&k)?.scale(1.0 / (w_q.cols() as f64).sqrt());
    Ok(scores.softmax_rows())
}

/// One layer: `[Z + A(Z)·Z·W_v]·W_o`.
pub fn layer_forward(z: &Matrix, layer: &LayerParams) -> Result<Matrix, TransformerError> {
    let a = attention_matrix(z, &layer.w_q, &layer.w_k)?;
    let mixed = a.matmul(&z.matmul(&layer.w_v)?)?;
    Ok(z.add(&mixed)?.matmul(&layer.w_o)?)
}

/// Runs every layer of the encoder on `Z`.
pub fn forward(z: &TokenMatrix, p: &ModelParams) -> Result<Matrix, TransformerError> {
    let mut h = z.matrix().clone();
    for layer in p.layers() {
        h = layer_forward(&h, layer)?;
    }
    Ok(h)
}

/// `½‖A − A*‖_F²`.
pub fn attention_loss(a: &Matrix, a_star: &Matrix) -> Result<f64, TransformerError> {
    Ok(0.5 * a.sub(a_star)?.sum_squares())
}

/// Mean squared and mean absolute error over all entries.
pub fn mse_mae(pred: &Matrix, target: &Matrix) -> Result<(f64, f64), TransformerError> {
    let diff = pred.sub(target)?;
    let n = diff.as_slice().len() as f64;
    let mse = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / n;
    let mae = diff.as_slice().iter().map(|d| d.abs()).sum::<f64>() / n;
    Ok((mse, mae))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normals, stream_rng, Stream};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = stream_rng(seed, Stream::Init, 0);
        Matrix::new(rows, cols, standard_normals(&mut rng, rows * cols)).unwrap()
    }

    #[test]
    fn tokenize_identity_single_patch() {
        let x = TsInput::new(Matrix::from_rows(&[vec![1.0, 2.0, 3.0, 4.0]]).unwrap());
        let t = tokenize_ts(&x, 4, &Matrix::identity(4)).unwrap();
        assert_eq!(t.count(), 1);
        assert_eq!(t.matrix().row(0), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn tokenize_layout_is_variable_major() {
        let x = TsInput::new(Matrix::from_rows(&[vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]]).unwrap());
        let t = tokenize_ts(&x, 2, &Matrix::identity(2)).unwrap();
        let rows: Vec<&[f64]> = (0..4).map(|r| t.matrix().row(r)).collect();
        assert_eq!(rows, vec![&[1.0, 2.0][..], &[3.0, 4.0], &[5.0, 6.0], &[7.0, 8.0]]);
    }

    #[test]
    fn tokenize_round_trip() {
        let vals = gaussian(3, 12, 1);
        let x = TsInput::new(vals.clone());
        let t = tokenize_ts(&x, 4, &Matrix::identity(4)).unwrap();
        let rebuilt = Matrix::from_fn(3, 12, |v, i| t.matrix()[(v * 3 + i / 4, i % 4)]);
        assert_eq!(rebuilt, vals);
    }

    #[test]
    fn tokenize_rejects_ragged_series() {
        let x = TsInput::new(gaussian(1, 5, 0));
        let err = tokenize_ts(&x, 2, &Matrix::identity(2)).unwrap_err();
        assert!(err.to_string().contains("left-pad"));
    }

    #[test]
    fn image_patches() {
        let img = ImgInput::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = patch_embed_img(&img, 2, &Matrix::identity(4)).unwrap();
        assert_eq!(t.matrix().as_slice(), &[1.0, 2.0, 3.0, 4.0]);

        let img = ImgInput::new(1, 4, 4, (0..16).map(f64::from).collect()).unwrap();
        let t = patch_embed_img(&img, 2, &Matrix::identity(4)).unwrap();
        assert_eq!(t.matrix().row(0), &[0.0, 1.0, 4.0, 5.0]);
        assert_eq!(t.matrix().row(1), &[2.0, 3.0, 6.0, 7.0]);
        assert_eq!(t.matrix().row(2), &[8.0, 9.0, 12.0, 13.0]);
        assert_eq!(t.matrix().row(3), &[10.0, 11.0, 14.0, 15.0]);

        assert!(matches!(
            patch_embed_img(&img, 3, &Matrix::identity(9)),
            Err(TransformerError::ImagePatch { .. })
        ));
    }

    #[test]
    fn image_round_trip() {
        let (c, h, w, p) = (3, 4, 6, 2);
        let data = gaussian(1, c * h * w, 4).into_vec();
        let img = ImgInput::new(c, h, w, data.clone()).unwrap();
        let t = patch_embed_img(&img, p, &Matrix::identity(c * p * p)).unwrap();
        let mut rebuilt = vec![0.0; data.len()];
        for r in 0..t.count() {
            let (by, bx) = (r / (w / p), r % (w / p));
            for k in 0..c * p * p {
                let (ch, py, px) = (k / (p * p), (k / p) % p, k % p);
                rebuilt[(ch * h + by * p + py) * w + bx * p + px] = t.matrix()[(r, k)];
            }
        }
        assert_eq!(rebuilt, data);
    }

    #[test]
    fn attention_special_cases() {
        let a = attention_matrix(&Matrix::zeros(5, 3), &gaussian(3, 2, 0), &gaussian(3, 2, 1)).unwrap();
        assert!(a.as_slice().iter().all(|&x| (x - 0.2).abs() < 1e-15));
        let a = attention_matrix(&gaussian(1, 3, 2), &gaussian(3, 2, 0), &gaussian(3, 2, 1)).unwrap();
        assert_eq!(a.as_slice(), &[1.0]);
    }

    #[test]
    fn attention_matches_two_step_composition() {
        let z = gaussian(6, 5, 3);
        let (wq, wk) = (gaussian(5, 4, 4), gaussian(5, 4, 5));
        let a = attention_matrix(&z, &wq, &wk).unwrap();
        // Explicit scores, then a hand-written softmax.
        let q = z.matmul(&wq).unwrap();
        let k = z.matmul(&wk).unwrap();
        for i in 0..6 {
            let s: Vec<f64> = (0..6)
                .map(|j| (0..4).map(|c| q[(i, c)] * k[(j, c)]).sum::<f64>() / 2.0)
                .collect();
            let mx = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = s.iter().map(|x| (x - mx).exp()).collect();
            let tot: f64 = e.iter().sum();
            for j in 0..6 {
                assert!((a[(i, j)] - e[j] / tot).abs() < 1e-14);
            }
            assert!((a.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    fn layer(d: usize, d_m: usize, d_out: usize, seed: u64) -> LayerParams {
        LayerParams {
            w_q: gaussian(d, d_m, seed),
            w_k: gaussian(d, d_m, seed + 1),
            w_v: gaussian(d, d, seed + 2),
            w_o: gaussian(d, d_out, seed + 3),
        }
    }

    #[test]
    fn zero_value_weights_leave_only_the_residual() {
        let mut l = layer(4, 3, 2, 10);
        l.w_v = Matrix::zeros(4, 4);
        let z = gaussian(5, 4, 1);
        let out = layer_forward(&z, &l).unwrap();
        assert_eq!(out, z.matmul(&l.w_o).unwrap());
    }

    #[test]
    fn single_token_forward() {
        let l = layer(3, 2, 3, 20);
        let z = gaussian(1, 3, 2);
        let out = layer_forward(&z, &l).unwrap();
        let want = z.add(&z.matmul(&l.w_v).unwrap()).unwrap().matmul(&l.w_o).unwrap();
        for (a, b) in out.as_slice().iter().zip(want.as_slice()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn forward_matches_explicit_chain() {
        let l = layer(4, 3, 2, 30);
        let z = gaussian(5, 4, 3);
        let out = layer_forward(&z, &l).unwrap();
        let a = attention_matrix(&z, &l.w_q, &l.w_k).unwrap();
        let mut want = Matrix::zeros(5, 2);
        for i in 0..5 {
            let mut r = z.row(i).to_vec();
            for (c, rc) in r.iter_mut().enumerate() {
                for j in 0..5 {
                    for k in 0..4 {
                        *rc += a[(i, j)] * z[(j, k)] * l.w_v[(k, c)];
                    }
                }
            }
            for o in 0..2 {
                want[(i, o)] = (0..4).map(|c| r[c] * l.w_o[(c, o)]).sum();
            }
        }
        for (x, y) in out.as_slice().iter().zip(want.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_loss_cases() {
        let a = gaussian(3, 3, 1);
        assert_eq!(attention_loss(&a, &a).unwrap(), 0.0);
        let u = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((attention_loss(&u, &Matrix::identity(2)).unwrap() - 0.5).abs() < 1e-15);
        let b = gaussian(3, 3, 2);
        let direct: f64 = (0..9).map(|i| (a.as_slice()[i] - b.as_slice()[i]).powi(2)).sum::<f64>() / 2.0;
        assert!((attention_loss(&a, &b).unwrap() - direct).abs() < 1e-13);
        assert!(attention_loss(&a, &Matrix::identity(2)).is_err());
    }

    #[test]
    fn mse_mae_cases() {
        let p = gaussian(2, 3, 7);
        assert_eq!(mse_mae(&p, &p).unwrap(), (0.0, 0.0));
        let t = p.map(|x| x - 2.0);
        let (mse, mae) = mse_mae(&p, &t).unwrap();
        assert!((mse - 4.0).abs() < 1e-13 && (mae - 2.0).abs() < 1e-13);
        let q = gaussian(2, 3, 8);
        let (mse, mae) = mse_mae(&p, &q).unwrap();
        let d: Vec<f64> = p.as_slice().iter().zip(q.as_slice()).map(|(a, b)| a - b).collect();
        assert!((mse - d.iter().map(|x| x * x).sum::<f64>() / 6.0).abs() < 1e-14);
        assert!((mae - d.iter().map(|x| x.abs()).sum::<f64>() / 6.0).abs() < 1e-14);
    }
}
