//! Fully connected networks with internal reverse-mode gradients.
//!
//! Layout: `h = x·W + b`, rectified-linear on hidden layers, linear input
//! and output mappings. Everything is double precision; batches are
//! row-major `(batch, dim)` arrays.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Multi-layer perceptron: affine → ReLU stack → affine.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

/// Parameter-shaped gradient (or moment) arrays for one [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

/// Post-activation values per layer; `acts[0]` is the input batch and
/// `acts[L]` the linear output.
pub struct MlpCache {
    acts: Vec<Array2<f64>>,
}

impl Mlp {
    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn new(dims: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::Param(format!("invalid layer dims {dims:?}")));
        }
        let mut w = Vec::new();
        let mut b = Vec::new();
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let k = 1.0 / (fan_in as f64).sqrt();
            w.push(Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-k..k)));
            b.push(Array1::from_shape_fn(fan_out, |_| rng.random_range(-k..k)));
        }
        Ok(Mlp { dims: dims.to_vec(), w, b })
    }

    /// All-zero parameters; with an output bias this is a constant net.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::Param(format!("invalid layer dims {dims:?}")));
        }
        let w = dims.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect();
        let b = dims.windows(2).map(|p| Array1::zeros(p[1])).collect();
        Ok(Mlp { dims: dims.to_vec(), w, b })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn in_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Shrink the output layer; a near-zero head keeps the untrained policy
    /// close to the deterministic center action.
    pub fn scale_last_layer(&mut self, c: f64) {
        self.w.last_mut().unwrap().mapv_inplace(|x| x * c);
        self.b.last_mut().unwrap().mapv_inplace(|x| x * c);
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec())
            .map_err(|e| Error::Param(e.to_string()))?;
        Ok(self.forward_batch(&x)?.row(0).to_vec())
    }

    pub fn forward_batch(&self, input: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(input)?.1)
    }

    /// Forward pass retaining every activation for [`Mlp::backward`].
    pub fn forward_cached(&self, input: &Array2<f64>) -> Result<(MlpCache, Array2<f64>)> {
        if input.ncols() != self.dims[0] {
            return Err(Error::Param(format!(
                "input has {} features, net expects {}",
                input.ncols(),
                self.dims[0]
            )));
        }
        let layers = self.w.len();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.clone());
        for l in 0..layers {
            let mut h = acts[l].dot(&self.w[l]) + &self.b[l];
            if l + 1 < layers {
                h.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(h);
        }
        let out = acts.last().unwrap().clone();
        Ok((MlpCache { acts }, out))
    }

    /// Reverse-mode gradients. `g_out` is `∂L/∂output` per sample (any
    /// batch-mean factor included by the caller); returns parameter
    /// gradients and `∂L/∂input`.
    pub fn backward(&self, cache: &MlpCache, g_out: &Array2<f64>) -> (MlpGrads, Array2<f64>) {
        let layers = self.w.len();
        assert_eq!(g_out.dim(), cache.acts[layers].dim(), "output gradient shape mismatch");
        let mut grads = MlpGrads::zeros_like(self);
        let mut g = g_out.clone();
        for l in (0..layers).rev() {
            grads.w[l] = cache.acts[l].t().dot(&g);
            grads.b[l] = g.sum_axis(Axis(0));
            let mut g_in = g.dot(&self.w[l].t());
            if l > 0 {
                // ReLU mask: output > 0 iff pre-activation > 0.
                g_in.zip_mut_with(&cache.acts[l], |gi, &a| {
                    if a <= 0.0 {
                        *gi = 0.0;
                    }
                });
            }
            g = g_in;
        }
        (grads, g)
    }

    pub fn param_count(&self) -> usize {
        self.w.iter().map(|w| w.len()).sum::<usize>() + self.b.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Parameters flattened in layer order, weights before biases per layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.w.len() {
            out.extend(self.w[l].iter());
            out.extend(self.b[l].iter());
        }
        out
    }

    /// Inverse of [`Mlp::flatten`] for the same dims.
    pub fn from_flat(dims: &[usize], flat: &[f64]) -> Result<Self> {
        let mut net = Mlp::zeros(dims)?;
        if flat.len() != net.param_count() {
            return Err(Error::Data(format!(
                "flat parameter vector has {} values, net needs {}",
                flat.len(),
                net.param_count()
            )));
        }
        let mut k = 0;
        for l in 0..net.w.len() {
            for v in net.w[l].iter_mut() {
                *v = flat[k];
                k += 1;
            }
            for v in net.b[l].iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
        Ok(net)
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.b.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            w: net.w.iter().map(|w| Array2::zeros(w.dim())).collect(),
            b: net.b.iter().map(|b| Array1::zeros(b.dim())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.b.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// `target ← (1−τ)·target + τ·source`; τ weights the NEW parameters.
pub fn polyak_update(target: &mut Mlp, source: &Mlp, tau: f64) -> Result<()> {
    if target.dims != source.dims {
        return Err(Error::Param(format!(
            "polyak shape mismatch: {:?} vs {:?}",
            target.dims, source.dims
        )));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Param(format!("tau must be in [0, 1], got {tau}")));
    }
    for l in 0..target.w.len() {
        target.w[l].zip_mut_with(&source.w[l], |t, &s| *t = (1.0 - tau) * *t + tau * s);
        target.b[l].zip_mut_with(&source.b[l], |t, &s| *t = (1.0 - tau) * *t + tau * s);
    }
    Ok(())
}

/// Adaptive moment estimation with bias correction; descends.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: MlpGrads,
    v: MlpGrads,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: MlpGrads::zeros_like(net),
            v: MlpGrads::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        for l in 0..net.w.len() {
            for ((p, g), (m, v)) in net.w[l]
                .iter_mut()
                .zip(grads.w[l].iter())
                .zip(self.m.w[l].iter_mut().zip(self.v.w[l].iter_mut()))
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            }
            for ((p, g), (m, v)) in net.b[l]
                .iter_mut()
                .zip(grads.b[l].iter())
                .zip(self.m.b[l].iter_mut().zip(self.v.b[l].iter_mut()))
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            }
        }
    }
}

/// Scalar-parameter Adam (temperature auto-tuning).
#[derive(Debug, Clone)]
pub struct ScalarAdam {
    lr: f64,
    t: u64,
    m: f64,
    v: f64,
}

impl ScalarAdam {
    pub fn new(lr: f64) -> Self {
        ScalarAdam { lr, t: 0, m: 0.0, v: 0.0 }
    }

    pub fn step(&mut self, param: &mut f64, grad: f64) {
        self.t += 1;
        self.m = 0.9 * self.m + 0.1 * grad;
        self.v = 0.999 * self.v + 0.001 * grad * grad;
        let mhat = self.m / (1.0 - 0.9f64.powi(self.t as i32));
        let vhat = self.v / (1.0 - 0.999f64.powi(self.t as i32));
        *param -= self.lr * mhat / (vhat.sqrt() + 1e-8);
    }
}
