use rand::Rng;

use crate::data::SparseVector;
use crate::error::{Error, Result};
use crate::model::real::{gemm, Precision, Real};
use crate::rng::{self, tag};

/// Shape and initialization of a two-hidden-layer rectifier network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: [usize; 2],
    pub output_dim: usize,
    pub precision: Precision,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden: [usize; 2], output_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            hidden,
            output_dim,
            precision: Precision::F32,
            seed: 0,
        }
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden.contains(&0) || self.output_dim == 0 {
            return Err(Error::config(format!("all layer widths must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Number of scalar parameters, biases included.
    pub fn param_count(&self) -> usize {
        let [h1, h2] = self.hidden;
        self.input_dim * h1 + h1 + h1 * h2 + h2 + h2 * self.output_dim + self.output_dim
    }

    /// Serialized payload size: parameter count × bytes per scalar.
    pub fn byte_size(&self) -> usize {
        self.param_count() * self.precision.bytes()
    }
}

/// Parameters of `logits = W3ᵀ·relu(W2ᵀ·relu(W1ᵀx + b1) + b2) + b3`.
///
/// Weight matrices are stored row-major as `fan_in × fan_out`, so row `i` of
/// `w1` holds the outgoing weights of input feature `i` and a sparse input
/// only touches the rows of its nonzero features.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub(crate) dims: [usize; 4],
    pub(crate) w1: Vec<T>,
    pub(crate) b1: Vec<T>,
    pub(crate) w2: Vec<T>,
    pub(crate) b2: Vec<T>,
    pub(crate) w3: Vec<T>,
    pub(crate) b3: Vec<T>,
}

/// Derivatives of a loss with respect to every tensor of an [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T>(pub(crate) MlpParams<T>);

impl<T: Real> Gradients<T> {
    pub fn tensors(&self) -> [&[T]; 6] {
        self.0.tensors()
    }

    pub fn zeros_like(params: &MlpParams<T>) -> Self {
        Gradients(MlpParams::zeros(params.dims))
    }

    pub fn dims(&self) -> [usize; 4] {
        self.0.dims
    }

    /// View the gradient as a parameter set (e.g. to feed `sgd_step` a
    /// parameter-shaped value).
    pub fn into_params(self) -> MlpParams<T> {
        self.0
    }

    pub fn from_params(p: MlpParams<T>) -> Self {
        Gradients(p)
    }
}

impl<T: Real> MlpParams<T> {
    pub(crate) fn zeros(dims: [usize; 4]) -> Self {
        let [d, h1, h2, o] = dims;
        MlpParams {
            dims,
            w1: vec![T::zero(); d * h1],
            b1: vec![T::zero(); h1],
            w2: vec![T::zero(); h1 * h2],
            b2: vec![T::zero(); h2],
            w3: vec![T::zero(); h2 * o],
            b3: vec![T::zero(); o],
        }
    }

    /// Glorot-uniform weights `U(±√(6/(fan_in+fan_out)))`, zero biases.
    pub fn init(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        if config.precision != T::PRECISION {
            return Err(Error::config(format!(
                "config precision {} does not match parameter type {}",
                config.precision.name(),
                T::PRECISION.name()
            )));
        }
        let [h1, h2] = config.hidden;
        let mut p = Self::zeros([config.input_dim, h1, h2, config.output_dim]);
        let layers = [
            (&mut p.w1, config.input_dim, h1),
            (&mut p.w2, h1, h2),
            (&mut p.w3, h2, config.output_dim),
        ];
        for (layer, (w, fan_in, fan_out)) in layers.into_iter().enumerate() {
            let scale = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut r = rng::stream(config.seed, &[tag::MODEL_INIT, layer as u64]);
            for v in w.iter_mut() {
                *v = T::of(r.gen_range(-scale..scale));
            }
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn hidden(&self) -> [usize; 2] {
        [self.dims[1], self.dims[2]]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[3]
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn config(&self) -> MlpConfig {
        MlpConfig {
            input_dim: self.dims[0],
            hidden: [self.dims[1], self.dims[2]],
            output_dim: self.dims[3],
            precision: T::PRECISION,
            seed: 0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.config().param_count()
    }

    pub fn byte_size(&self) -> usize {
        self.param_count() * T::PRECISION.bytes()
    }

    /// Tensors in canonical order `w1, b1, w2, b2, w3, b3`.
    pub fn tensors(&self) -> [&[T]; 6] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; 6] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &SparseVector) -> Result<()> {
        match x.indices().last() {
            Some(&i) if i as usize >= self.dims[0] => Err(Error::shape(format!(
                "feature index {i} >= input dimension {}",
                self.dims[0]
            ))),
            _ => Ok(()),
        }
    }

    /// Logits of one sample.
    pub fn forward(&self, x: &SparseVector) -> Result<Vec<T>> {
        self.check_input(x)?;
        Ok(self.forward_batch(&[x]))
    }

    /// Logits of a batch, row-major `n × output_dim`. Inputs must already be
    /// within the input dimension.
    pub fn forward_batch(&self, xs: &[&SparseVector]) -> Vec<T> {
        self.activations(xs).z
    }

    fn activations(&self, xs: &[&SparseVector]) -> Activations<T> {
        let [_, h1, h2, o] = self.dims;
        let n = xs.len();
        let mut a1 = Vec::with_capacity(n * h1);
        for x in xs {
            a1.extend_from_slice(&self.b1);
            let row = a1.len() - h1;
            for (i, v) in x.iter() {
                let v = T::of(v);
                let w = &self.w1[i as usize * h1..(i as usize + 1) * h1];
                for (acc, &wv) in a1[row..].iter_mut().zip(w) {
                    *acc += v * wv;
                }
            }
        }
        relu_inplace(&mut a1);

        let mut a2 = broadcast_rows(&self.b2, n);
        gemm::nn(n, h1, h2, &a1, &self.w2, T::one(), &mut a2);
        relu_inplace(&mut a2);

        let mut z = broadcast_rows(&self.b3, n);
        gemm::nn(n, h2, o, &a2, &self.w3, T::one(), &mut z);
        Activations { a1, a2, z }
    }

    /// Mean binary cross-entropy of `σ(logits)` against dense 0/1 targets,
    /// averaged over samples and outputs, and its exact gradient.
    pub fn loss_and_grad(&self, batch: &[(&SparseVector, &[T])]) -> Result<(f64, Gradients<T>)> {
        let o = self.dims[3];
        let mut y = Vec::with_capacity(batch.len() * o);
        for (n, (x, t)) in batch.iter().enumerate() {
            self.check_input(x)?;
            if t.len() != o {
                return Err(Error::shape(format!(
                    "sample {n}: target length {} != output dimension {o}",
                    t.len()
                )));
            }
            if t.iter().any(|&v| v != T::zero() && v != T::one()) {
                return Err(Error::input(format!("sample {n}: targets must be 0 or 1")));
            }
            y.extend_from_slice(t);
        }
        let xs: Vec<&SparseVector> = batch.iter().map(|(x, _)| *x).collect();
        Ok(self.loss_and_grad_dense(&xs, &y))
    }

    /// Same loss with targets given as positive output indices per sample.
    pub fn loss_and_grad_sparse(&self, xs: &[&SparseVector], positives: &[&[u32]]) -> Result<(f64, Gradients<T>)> {
        let o = self.dims[3];
        if xs.len() != positives.len() {
            return Err(Error::shape("one positive set per input is required"));
        }
        let mut y = vec![T::zero(); xs.len() * o];
        for (n, (x, pos)) in xs.iter().zip(positives).enumerate() {
            self.check_input(x)?;
            for &l in pos.iter() {
                let slot = y.get_mut(n * o + l as usize).filter(|_| (l as usize) < o);
                *slot.ok_or_else(|| Error::input(format!("target index {l} >= output dimension {o}")))? = T::one();
            }
        }
        Ok(self.loss_and_grad_dense(xs, &y))
    }

    pub(crate) fn loss_and_grad_dense(&self, xs: &[&SparseVector], y: &[T]) -> (f64, Gradients<T>) {
        let [_, h1, h2, o] = self.dims;
        let n = xs.len();
        let mut g = MlpParams::zeros(self.dims);
        if n == 0 {
            return (0.0, Gradients(g));
        }
        let Activations { a1, a2, z } = self.activations(xs);

        let scale = 1.0 / (n * o) as f64;
        let mut loss = 0.0f64;
        let mut dz = z;
        for (d, &t) in dz.iter_mut().zip(y) {
            let zf = d.to_f64().unwrap();
            let tf = t.to_f64().unwrap();
            loss += zf.max(0.0) - zf * tf + (-zf.abs()).exp().ln_1p();
            *d = T::of((sigmoid(zf) - tf) * scale);
        }
        loss *= scale;

        gemm::tn(h2, n, o, &a2, &dz, T::zero(), &mut g.w3);
        col_sums(&dz, o, &mut g.b3);

        let mut da2 = vec![T::zero(); n * h2];
        gemm::nt(n, o, h2, &dz, &self.w3, T::zero(), &mut da2);
        mask_relu(&mut da2, &a2);
        gemm::tn(h1, n, h2, &a1, &da2, T::zero(), &mut g.w2);
        col_sums(&da2, h2, &mut g.b2);

        let mut da1 = vec![T::zero(); n * h1];
        gemm::nt(n, h2, h1, &da2, &self.w2, T::zero(), &mut da1);
        mask_relu(&mut da1, &a1);
        col_sums(&da1, h1, &mut g.b1);
        for (x, row) in xs.iter().zip(da1.chunks_exact(h1)) {
            for (i, v) in x.iter() {
                let v = T::of(v);
                let gw = &mut g.w1[i as usize * h1..(i as usize + 1) * h1];
                for (acc, &d) in gw.iter_mut().zip(row) {
                    *acc += v * d;
                }
            }
        }
        (loss, Gradients(g))
    }

    /// In-place `θ ← θ − lr·g`.
    pub fn apply_sgd(&mut self, grads: &Gradients<T>, lr: f64) -> Result<()> {
        if grads.0.dims != self.dims {
            return Err(Error::shape("gradient shape does not match parameters"));
        }
        let lr = T::of(lr);
        for (p, g) in self.tensors_mut().into_iter().zip(grads.tensors()) {
            for (pv, &gv) in p.iter_mut().zip(g) {
                *pv -= lr * gv;
            }
        }
        Ok(())
    }
}

struct Activations<T> {
    a1: Vec<T>,
    a2: Vec<T>,
    z: Vec<T>,
}

fn broadcast_rows<T: Copy>(row: &[T], n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(row.len() * n);
    for _ in 0..n {
        out.extend_from_slice(row);
    }
    out
}

fn relu_inplace<T: Real>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Zero gradient entries whose forward activation was clipped by the
/// rectifier.
fn mask_relu<T: Real>(grad: &mut [T], activation: &[T]) {
    for (g, &a) in grad.iter_mut().zip(activation) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

fn col_sums<T: Real>(m: &[T], cols: usize, out: &mut [T]) {
    out.iter_mut().for_each(|v| *v = T::zero());
    for row in m.chunks_exact(cols) {
        for (acc, &v) in out.iter_mut().zip(row) {
            *acc += v;
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(z)`, stable for large `|z|`.
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    -((-z).max(0.0) + (-z.abs()).exp().ln_1p())
}

/// Build parameters from a config.
pub fn init_mlp<T: Real>(config: &MlpConfig) -> Result<MlpParams<T>> {
    MlpParams::init(config)
}

/// `params − lr·grads`.
pub fn sgd_step<T: Real>(params: &MlpParams<T>, grads: &Gradients<T>, lr: f64) -> Result<MlpParams<T>> {
    if !(lr > 0.0) {
        return Err(Error::config(format!("learning rate must be positive, got {lr}")));
    }
    let mut out = params.clone();
    out.apply_sgd(grads, lr)?;
    Ok(out)
}

/// Elementwise weighted mean; weights are normalized to sum to 1 and the
/// accumulation runs in `f64`.
pub fn average_params<T: Real>(models: &[&MlpParams<T>], weights: &[f64]) -> Result<MlpParams<T>> {
    let first = models
        .first()
        .ok_or_else(|| Error::input("cannot average an empty set of models"))?;
    if weights.len() != models.len() {
        return Err(Error::shape(format!("{} models but {} weights", models.len(), weights.len())));
    }
    if models.iter().any(|m| m.dims != first.dims) {
        return Err(Error::shape("models to average have different shapes"));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::input("averaging weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::input("averaging weights are all zero"));
    }
    let mut out = MlpParams::zeros(first.dims);
    let mut acc: Vec<f64> = Vec::new();
    for (t, dst) in out.tensors_mut().into_iter().enumerate() {
        acc.clear();
        acc.resize(dst.len(), 0.0);
        for (m, &w) in models.iter().zip(weights) {
            let w = w / total;
            for (a, &v) in acc.iter_mut().zip(m.tensors()[t]) {
                *a += w * v.to_f64().unwrap();
            }
        }
        for (d, &a) in dst.iter_mut().zip(&acc) {
            *d = T::of(a);
        }
    }
    Ok(out)
}
