use std::sync::Arc;

use rand::seq::index;
use rayon::prelude::*;

use super::{attention_matrix, patch_matrix, ModelParams, ModelShape, TransformerError, TsInput};
use crate::linalg::Matrix;
use crate::objective::{Batch, Objective, ParamVector};
use crate::rng::{stream_rng, uniforms, Stream};

/// Teacher query/key weights are uniform in `±TEACHER_SCALE/√d`, wider than
/// the student initialisation so the target attention is far from uniform.
pub const TEACHER_SCALE: f64 = 3.0;

/// One forecasting example: `D×L` input and `D×H` target.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub input: Matrix,
    pub target: Matrix,
}

/// What the model is trained to do.
#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    /// Mean squared error of the head's forecast.
    ForecastMse,
    /// `½‖A − A*‖²` of the first layer's attention against a fixed target
    /// per window.
    AttentionAlign { targets: Arc<[Matrix]> },
}

/// The model as an [`Objective`] over its flattened parameters.
///
/// Windows are evaluated in parallel; per-window results are summed in
/// window order, so losses and gradients are bit-reproducible.
#[derive(Clone, Debug)]
pub struct ModelObjective {
    shape: ModelShape,
    task: Task,
    windows: Arc<[Window]>,
    patches: Arc<[Matrix]>,
    batch_size: Option<usize>,
}

struct LayerCache {
    z: Matrix,
    q: Matrix,
    k: Matrix,
    a: Matrix,
    v: Matrix,
    r: Matrix,
}

struct WindowEval {
    loss: f64,
    grad: Option<Vec<f64>>,
}

impl ModelObjective {
    pub fn forecast(shape: ModelShape, windows: Vec<Window>) -> Result<Self, TransformerError> {
        Self::build(shape, Task::ForecastMse, windows)
    }

    /// Alignment against a hidden teacher: `A*` is the teacher's attention on
    /// the tokens produced by `init.phi_ts`, fixed at construction.
    pub fn attention_align(
        shape: ModelShape,
        windows: Vec<Window>,
        init: &ModelParams,
        teacher_seed: u64,
    ) -> Result<Self, TransformerError> {
        shape.validate()?;
        let bound = TEACHER_SCALE / (shape.d as f64).sqrt();
        let mut rng = stream_rng(teacher_seed, Stream::Teacher, 0);
        let n = shape.d * shape.d_m;
        let w_q = Matrix::new(shape.d, shape.d_m, uniforms(&mut rng, n, -bound, bound))?;
        let w_k = Matrix::new(shape.d, shape.d_m, uniforms(&mut rng, n, -bound, bound))?;
        let targets = windows
            .iter()
            .map(|win| {
                let tokens = patch_matrix(&TsInput::new(win.input.clone()), shape.patch_len)?.matmul(&init.phi_ts)?;
                attention_matrix(&tokens, &w_q, &w_k)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::attention_align_with_targets(shape, windows, targets)
    }

    pub fn attention_align_with_targets(
        shape: ModelShape,
        windows: Vec<Window>,
        targets: Vec<Matrix>,
    ) -> Result<Self, TransformerError> {
        if targets.len() != windows.len() {
            return Err(TransformerError::Config(format!(
                "{} attention targets for {} windows",
                targets.len(),
                windows.len()
            )));
        }
        let n = shape.tokens();
        if let Some(t) = targets.iter().find(|t| t.shape() != (n, n)) {
            return Err(TransformerError::Config(format!(
                "attention target is {}x{}, expected {n}x{n}",
                t.rows(),
                t.cols()
            )));
        }
        Self::build(
            shape,
            Task::AttentionAlign {
                targets: targets.into(),
            },
            windows,
        )
    }

    fn build(shape: ModelShape, task: Task, windows: Vec<Window>) -> Result<Self, TransformerError> {
        shape.validate()?;
        if windows.is_empty() {
            return Err(TransformerError::Config("no training windows".into()));
        }
        for (i, w) in windows.iter().enumerate() {
            if w.input.shape() != (shape.vars, shape.lookback) || w.target.shape() != (shape.vars, shape.horizon) {
                return Err(TransformerError::Config(format!(
                    "window {i} has input {:?} and target {:?}, expected ({}, {}) and ({}, {})",
                    w.input.shape(),
                    w.target.shape(),
                    shape.vars,
                    shape.lookback,
                    shape.vars,
                    shape.horizon
                )));
            }
        }
        let patches = windows
            .iter()
            .map(|w| patch_matrix(&TsInput::new(w.input.clone()), shape.patch_len))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            shape,
            task,
            windows: windows.into(),
            patches: patches.into(),
            batch_size: None,
        })
    }

    /// Minibatches of `size` windows per step (drawn without replacement).
    pub fn with_batch_size(mut self, size: Option<usize>) -> Self {
        self.batch_size = size.filter(|&b| b > 0 && b < self.windows.len());
        self
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    /// `D×H` forecast for one input window.
    pub fn predict(&self, params: &ModelParams, input: &Matrix) -> Result<Matrix, TransformerError> {
        let patches = patch_matrix(&TsInput::new(input.clone()), self.shape.patch_len)?;
        let (caches, y) = self.encode(params, &patches, params.layers().len())?;
        drop(caches);
        self.head(params, y)
    }

    /// Mean MSE and MAE of the forecast over `windows`.
    pub fn forecast_metrics(&self, w: &ParamVector, windows: &[Window]) -> Result<(f64, f64), TransformerError> {
        let params = ModelParams::unflatten(&self.shape, w)?;
        let (mut se, mut ae, mut n) = (0.0, 0.0, 0usize);
        for win in windows {
            let pred = self.predict(&params, &win.input)?;
            for (p, t) in pred.as_slice().iter().zip(win.target.as_slice()) {
                se += (p - t) * (p - t);
                ae += (p - t).abs();
            }
            n += pred.as_slice().len();
        }
        if n == 0 {
            return Err(TransformerError::Config("no evaluation windows".into()));
        }
        Ok((se / n as f64, ae / n as f64))
    }

    /// Last-layer representations of the first `max_windows` windows stacked
    /// row-wise, and the last layer's attention on the first window.
    pub fn representation(&self, w: &ParamVector, max_windows: usize) -> Result<(Matrix, Matrix), TransformerError> {
        let params = ModelParams::unflatten(&self.shape, w)?;
        let k = max_windows.clamp(1, self.windows.len());
        let mut rows = Vec::new();
        let mut attn = None;
        for patches in self.patches.iter().take(k) {
            let (caches, y) = self.encode(&params, patches, params.layers().len())?;
            if attn.is_none() {
                attn = caches.last().map(|c| c.a.clone());
            }
            rows.extend_from_slice(y.as_slice());
        }
        let cols = self.shape.d_out;
        let repr = Matrix::new(rows.len() / cols, cols, rows)?;
        Ok((repr, attn.expect("at least one layer")))
    }

    /// First-layer attention on window `i`.
    pub fn attention(&self, w: &ParamVector, i: usize) -> Result<Matrix, TransformerError> {
        let params = ModelParams::unflatten(&self.shape, w)?;
        let (caches, _) = self.encode(&params, &self.patches[i], 1)?;
        Ok(caches[0].a.clone())
    }

    fn encode(
        &self,
        params: &ModelParams,
        patches: &Matrix,
        depth: usize,
    ) -> Result<(Vec<LayerCache>, Matrix), TransformerError> {
        let mut h = patches.matmul(&params.phi_ts)?;
        let scale = 1.0 / (self.shape.d_m as f64).sqrt();
        let mut caches = Vec::with_capacity(depth);
        for layer in &params.layers()[..depth] {
            let q = h.matmul(&layer.w_q)?;
            let k = h.matmul(&layer.w_k)?;
            let a = q.matmul_t(&k)?.scale(scale).softmax_rows();
            let v = h.matmul(&layer.w_v)?;
            let r = h.add(&a.matmul(&v)?)?;
            let out = r.matmul(&layer.w_o)?;
            caches.push(LayerCache { z: h, q, k, a, v, r });
            h = out;
        }
        Ok((caches, h))
    }

    /// Each variable's `P` output tokens, flattened, times the shared head.
    fn head(&self, params: &ModelParams, y: Matrix) -> Result<Matrix, TransformerError> {
        let u = Matrix::new(self.shape.vars, self.shape.patches_per_var() * self.shape.d_out, y.into_vec())?;
        Ok(u.matmul(&params.head)?)
    }

    fn selected(&self, batch: &Batch) -> Vec<usize> {
        match batch {
            Batch::Full => (0..self.windows.len()).collect(),
            Batch::Subset(idx) => idx.to_vec(),
        }
    }

    fn eval(&self, w: &ParamVector, batch: &Batch, with_grad: bool) -> Result<(f64, Vec<f64>), TransformerError> {
        let params = ModelParams::unflatten(&self.shape, w)?;
        let idx = self.selected(batch);
        let count = idx.len() as f64;
        let per_window: Vec<Result<WindowEval, TransformerError>> = idx
            .par_iter()
            .map(|&i| match &self.task {
                Task::ForecastMse => self.forecast_window(&params, i, count, with_grad),
                Task::AttentionAlign { targets } => self.align_window(&params, i, &targets[i], count, with_grad),
            })
            .collect();
        let mut loss = 0.0;
        let mut grad = vec![0.0; if with_grad { w.dim() } else { 0 }];
        for r in per_window {
            let r = r?;
            loss += r.loss;
            if let Some(g) = r.grad {
                for (acc, x) in grad.iter_mut().zip(g) {
                    *acc += x;
                }
            }
        }
        Ok((loss, grad))
    }

    fn forecast_window(
        &self,
        params: &ModelParams,
        i: usize,
        count: f64,
        with_grad: bool,
    ) -> Result<WindowEval, TransformerError> {
        let s = &self.shape;
        let (caches, y) = self.encode(params, &self.patches[i], params.layers().len())?;
        let u = Matrix::new(s.vars, s.patches_per_var() * s.d_out, y.into_vec())?;
        let pred = u.matmul(&params.head)?;
        let diff = pred.sub(&self.windows[i].target)?;
        let denom = count * (s.vars * s.horizon) as f64;
        let loss = diff.sum_squares() / denom;
        if !with_grad {
            return Ok(WindowEval { loss, grad: None });
        }

        let mut g = ModelParams::zeros(s)?;
        let d_pred = diff.scale(2.0 / denom);
        g.head = u.t_matmul(&d_pred)?;
        let d_u = d_pred.matmul_t(&params.head)?;
        let mut d_y = Matrix::new(s.tokens(), s.d_out, d_u.into_vec())?;

        for (l, cache) in caches.iter().enumerate().rev() {
            let layer = &params.layers()[l];
            let gl = &mut g.layers_mut()[l];
            gl.w_o = cache.r.t_matmul(&d_y)?;
            let d_r = d_y.matmul_t(&layer.w_o)?;
            let d_a = d_r.matmul_t(&cache.v)?;
            let d_v = cache.a.t_matmul(&d_r)?;
            gl.w_v = cache.z.t_matmul(&d_v)?;
            let mut d_z = d_r;
            d_z.add_assign(&d_v.matmul_t(&layer.w_v)?)?;
            let (d_wq, d_wk, d_z_att) = self.attention_backward(cache, layer, &d_a)?;
            gl.w_q = d_wq;
            gl.w_k = d_wk;
            d_z.add_assign(&d_z_att)?;
            d_y = d_z;
        }
        g.phi_ts = self.patches[i].t_matmul(&d_y)?;
        Ok(WindowEval {
            loss,
            grad: Some(g.flatten().into_vec()),
        })
    }

    fn align_window(
        &self,
        params: &ModelParams,
        i: usize,
        target: &Matrix,
        count: f64,
        with_grad: bool,
    ) -> Result<WindowEval, TransformerError> {
        let (caches, _) = self.encode(params, &self.patches[i], 1)?;
        let cache = &caches[0];
        let diff = cache.a.sub(target)?;
        let loss = 0.5 * diff.sum_squares() / count;
        if !with_grad {
            return Ok(WindowEval { loss, grad: None });
        }
        let mut g = ModelParams::zeros(&self.shape)?;
        let layer = &params.layers()[0];
        let (d_wq, d_wk, d_z) = self.attention_backward(cache, layer, &diff.scale(1.0 / count))?;
        g.layers_mut()[0].w_q = d_wq;
        g.layers_mut()[0].w_k = d_wk;
        g.phi_ts = self.patches[i].t_matmul(&d_z)?;
        Ok(WindowEval {
            loss,
            grad: Some(g.flatten().into_vec()),
        })
    }

    /// Back through `A = softmax(Q·Kᵀ/√d_m)`: returns `(∂W_q, ∂W_k, ∂Z)`.
    fn attention_backward(
        &self,
        cache: &LayerCache,
        layer: &super::LayerParams,
        d_a: &Matrix,
    ) -> Result<(Matrix, Matrix, Matrix), TransformerError> {
        let scale = 1.0 / (self.shape.d_m as f64).sqrt();
        let n = cache.a.rows();
        let mut d_s = Matrix::zeros(n, n);
        for r in 0..n {
            let a = cache.a.row(r);
            let da = d_a.row(r);
            let dot: f64 = a.iter().zip(da).map(|(x, y)| x * y).sum();
            for (c, out) in d_s.row_mut(r).iter_mut().enumerate() {
                *out = a[c] * (da[c] - dot) * scale;
            }
        }
        let d_q = d_s.matmul(&cache.k)?;
        let d_k = d_s.t_matmul(&cache.q)?;
        let d_wq = cache.z.t_matmul(&d_q)?;
        let d_wk = cache.z.t_matmul(&d_k)?;
        let mut d_z = d_q.matmul_t(&layer.w_q)?;
        d_z.add_assign(&d_k.matmul_t(&layer.w_k)?)?;
        Ok((d_wq, d_wk, d_z))
    }
}

impl Objective for ModelObjective {
    fn dim(&self) -> usize {
        self.shape.param_count()
    }

    fn loss(&self, w: &ParamVector, batch: &Batch) -> f64 {
        self.eval(w, batch, false).map_or(f64::NAN, |(l, _)| l)
    }

    fn grad(&self, w: &ParamVector, batch: &Batch) -> ParamVector {
        self.loss_and_grad(w, batch).1
    }

    fn loss_and_grad(&self, w: &ParamVector, batch: &Batch) -> (f64, ParamVector) {
        match self.eval(w, batch, true) {
            Ok((l, g)) => (l, ParamVector(g)),
            Err(_) => (f64::NAN, ParamVector(vec![f64::NAN; self.dim()])),
        }
    }

    fn sample_batch(&self, seed: u64, step: u64) -> Batch {
        match self.batch_size {
            None => Batch::Full,
            Some(b) => {
                let mut rng = stream_rng(seed, Stream::Batch, step);
                let mut idx = index::sample(&mut rng, self.windows.len(), b).into_vec();
                idx.sort_unstable();
                Batch::Subset(idx.into())
            }
        }
    }
}
