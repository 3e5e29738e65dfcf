//! Layer implementations with cached activations for manual backprop.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Infer,
}

/// `c = a * b` (or `c += a * b`), with `a` of shape `m x k` and `b` of
/// shape `k x n` after the optional transposes. Inputs are row-major.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the slices cover exactly the strided extents passed in.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Init {
    /// Uniform in `±sqrt(6 / fan_in)`; for layers feeding a ReLU.
    KaimingUniform,
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`; for final linear outputs.
    XavierUniform,
    Zeros,
}

/// Fully connected layer over the feature axis. Applied to every
/// `(batch, point)` row independently, so on point tensors it is the shared
/// per-point MLP (a width-1 convolution).
#[derive(Clone, Debug)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    /// `inputs x outputs`, row-major.
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Option<Vec<f64>>,
    cache: Option<Tensor>,
}

impl Linear {
    pub fn new(inputs: usize, outputs: usize, bias: bool, init: Init, rng: &mut Rng) -> Self {
        let bound = match init {
            Init::KaimingUniform => (6.0 / inputs as f64).sqrt(),
            Init::XavierUniform => (6.0 / (inputs + outputs) as f64).sqrt(),
            Init::Zeros => 0.0,
        };
        let weight = (0..inputs * outputs)
            .map(|_| {
                if bound == 0.0 {
                    0.0
                } else {
                    rng.uniform_range(-bound, bound)
                }
            })
            .collect();
        Self {
            inputs,
            outputs,
            weight,
            bias: bias.then(|| vec![0.0; outputs]),
            grad_weight: vec![0.0; inputs * outputs],
            grad_bias: bias.then(|| vec![0.0; outputs]),
            cache: None,
        }
    }

    /// Square identity map with zero bias.
    pub fn identity(width: usize) -> Self {
        let mut l = Self::new(width, width, true, Init::Zeros, &mut Rng::new(0));
        for i in 0..width {
            l.weight[i * width + i] = 1.0;
        }
        l
    }

    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        if x.features != self.inputs {
            return Err(Error::ShapeMismatch {
                context: "linear input".into(),
                expected: format!("{} features", self.inputs),
                got: format!("{} features", x.features),
            });
        }
        let rows = x.rows();
        let mut y = Tensor::zeros(x.batch, x.points, self.outputs);
        gemm(
            rows,
            self.inputs,
            self.outputs,
            &x.data,
            false,
            &self.weight,
            false,
            &mut y.data,
            false,
        );
        if let Some(b) = &self.bias {
            for r in 0..rows {
                for (v, bv) in y.row_mut(r).iter_mut().zip(b) {
                    *v += bv;
                }
            }
        }
        self.cache = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor) -> Option<Tensor> {
        let x = self.cache.as_ref()?;
        let rows = x.rows();
        gemm(
            self.inputs,
            rows,
            self.outputs,
            &x.data,
            true,
            &dy.data,
            false,
            &mut self.grad_weight,
            true,
        );
        if let Some(gb) = &mut self.grad_bias {
            for r in 0..rows {
                for (g, d) in gb.iter_mut().zip(dy.row(r)) {
                    *g += d;
                }
            }
        }
        let mut dx = Tensor::zeros(x.batch, x.points, self.inputs);
        gemm(
            rows,
            self.outputs,
            self.inputs,
            &dy.data,
            false,
            &self.weight,
            true,
            &mut dx.data,
            false,
        );
        Some(dx)
    }
}

/// Batch normalization per feature over all `(batch, point)` rows.
#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub features: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub grad_gamma: Vec<f64>,
    pub grad_beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    cache: Option<BnCache>,
}

#[derive(Clone, Debug)]
struct BnCache {
    mode: Mode,
    x_hat: Tensor,
    inv_std: Vec<f64>,
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        Self {
            features,
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            grad_gamma: vec![0.0; features],
            grad_beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            cache: None,
        }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        if x.features != self.features {
            return Err(Error::ShapeMismatch {
                context: "batchnorm input".into(),
                expected: format!("{} features", self.features),
                got: format!("{} features", x.features),
            });
        }
        let rows = x.rows();
        let f = self.features;
        let (mean, var) = match mode {
            Mode::Train => {
                if rows < 2 {
                    return Err(Error::invalid(
                        "batchnorm in train mode needs at least two rows",
                    ));
                }
                let mut mean = vec![0.0; f];
                for r in 0..rows {
                    for (m, v) in mean.iter_mut().zip(x.row(r)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= rows as f64);
                let mut var = vec![0.0; f];
                for r in 0..rows {
                    for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= rows as f64);
                for j in 0..f {
                    self.running_mean[j] =
                        BN_MOMENTUM * self.running_mean[j] + (1.0 - BN_MOMENTUM) * mean[j];
                    self.running_var[j] =
                        BN_MOMENTUM * self.running_var[j] + (1.0 - BN_MOMENTUM) * var[j];
                }
                (mean, var)
            }
            Mode::Infer => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut x_hat = Tensor::zeros(x.batch, x.points, f);
        let mut y = Tensor::zeros(x.batch, x.points, f);
        for r in 0..rows {
            let xr = x.row(r);
            let xh = x_hat.row_mut(r);
            for j in 0..f {
                xh[j] = (xr[j] - mean[j]) * inv_std[j];
            }
            let yr = y.row_mut(r);
            let xh = x_hat.row(r);
            for j in 0..f {
                yr[j] = self.gamma[j] * xh[j] + self.beta[j];
            }
        }
        self.cache = Some(BnCache {
            mode,
            x_hat,
            inv_std,
        });
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor) -> Option<Tensor> {
        let cache = self.cache.as_ref()?;
        let rows = dy.rows();
        let f = self.features;
        let mut sum_dxh = vec![0.0; f];
        let mut sum_dxh_xh = vec![0.0; f];
        for r in 0..rows {
            let d = dy.row(r);
            let xh = cache.x_hat.row(r);
            for j in 0..f {
                self.grad_gamma[j] += d[j] * xh[j];
                self.grad_beta[j] += d[j];
                let dxh = d[j] * self.gamma[j];
                sum_dxh[j] += dxh;
                sum_dxh_xh[j] += dxh * xh[j];
            }
        }
        let mut dx = Tensor::zeros(dy.batch, dy.points, f);
        let nr = rows as f64;
        for r in 0..rows {
            let d = dy.row(r);
            let xh = cache.x_hat.row(r);
            let out = dx.row_mut(r);
            for j in 0..f {
                let dxh = d[j] * self.gamma[j];
                out[j] = match cache.mode {
                    Mode::Train => {
                        cache.inv_std[j] * (dxh - sum_dxh[j] / nr - xh[j] * sum_dxh_xh[j] / nr)
                    }
                    Mode::Infer => cache.inv_std[j] * dxh,
                };
            }
        }
        Some(dx)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    fn forward(&mut self, x: &Tensor) -> Tensor {
        let mut y = x.clone();
        let mut mask = Vec::with_capacity(y.data.len());
        for v in &mut y.data {
            let on = *v > 0.0;
            if !on {
                *v = 0.0;
            }
            mask.push(on);
        }
        self.mask = Some(mask);
        y
    }

    fn backward(&mut self, dy: &Tensor) -> Option<Tensor> {
        let mask = self.mask.as_ref()?;
        let mut dx = dy.clone();
        for (d, &on) in dx.data.iter_mut().zip(mask) {
            if !on {
                *d = 0.0;
            }
        }
        Some(dx)
    }
}

/// Feature-wise maximum over the points axis: `(b, p, f) -> (b, 1, f)`.
#[derive(Clone, Debug, Default)]
pub struct MaxPool {
    cache: Option<MaxPoolCache>,
}

#[derive(Clone, Debug)]
struct MaxPoolCache {
    points: usize,
    argmax: Vec<usize>,
    tie: bool,
}

impl MaxPool {
    fn forward(&mut self, x: &Tensor) -> Tensor {
        let (b, p, f) = x.shape();
        let mut y = Tensor::zeros(b, 1, f);
        let mut argmax = vec![0usize; b * f];
        let mut tie = false;
        for bi in 0..b {
            for j in 0..f {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                let mut count = 0;
                for pi in 0..p {
                    let v = x.data[(bi * p + pi) * f + j];
                    if v > best {
                        best = v;
                        arg = pi;
                        count = 1;
                    } else if v == best {
                        count += 1;
                    }
                }
                // Ties at exactly zero come from rectified units whose
                // gradient vanishes on both sides; they are differentiable.
                if count > 1 && best != 0.0 {
                    tie = true;
                }
                y.data[bi * f + j] = best;
                argmax[bi * f + j] = arg;
            }
        }
        self.cache = Some(MaxPoolCache {
            points: p,
            argmax,
            tie,
        });
        y
    }

    fn backward(&mut self, dy: &Tensor) -> Option<Tensor> {
        let c = self.cache.as_ref()?;
        let (b, _, f) = dy.shape();
        let mut dx = Tensor::zeros(b, c.points, f);
        for bi in 0..b {
            for j in 0..f {
                let pi = c.argmax[bi * f + j];
                dx.data[(bi * c.points + pi) * f + j] += dy.data[bi * f + j];
            }
        }
        Some(dx)
    }

    pub fn last_had_tie(&self) -> bool {
        self.cache.as_ref().is_some_and(|c| c.tie)
    }
}

#[derive(Clone, Debug)]
pub enum Layer {
    Linear(Linear),
    BatchNorm(BatchNorm),
    Relu(Relu),
    MaxPool(MaxPool),
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Linear(_) => "linear",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu(_) => "relu",
            Layer::MaxPool(_) => "maxpool",
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        match self {
            Layer::Linear(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Relu(l) => Ok(l.forward(x)),
            Layer::MaxPool(l) => Ok(l.forward(x)),
        }
    }

    /// Returns `None` when no forward pass is cached.
    pub fn backward(&mut self, dy: &Tensor) -> Option<Tensor> {
        match self {
            Layer::Linear(l) => l.backward(dy),
            Layer::BatchNorm(l) => l.backward(dy),
            Layer::Relu(l) => l.backward(dy),
            Layer::MaxPool(l) => l.backward(dy),
        }
    }

    pub fn clear_cache(&mut self) {
        match self {
            Layer::Linear(l) => l.cache = None,
            Layer::BatchNorm(l) => l.cache = None,
            Layer::Relu(l) => l.mask = None,
            Layer::MaxPool(l) => l.cache = None,
        }
    }

    /// Trainable parameter blocks paired with their gradient buffers.
    pub fn param_blocks(&self) -> Vec<(&[f64], &[f64])> {
        match self {
            Layer::Linear(l) => {
                let mut v = vec![(l.weight.as_slice(), l.grad_weight.as_slice())];
                if let (Some(b), Some(g)) = (&l.bias, &l.grad_bias) {
                    v.push((b.as_slice(), g.as_slice()));
                }
                v
            }
            Layer::BatchNorm(l) => vec![
                (l.gamma.as_slice(), l.grad_gamma.as_slice()),
                (l.beta.as_slice(), l.grad_beta.as_slice()),
            ],
            Layer::Relu(_) | Layer::MaxPool(_) => Vec::new(),
        }
    }

    pub fn param_blocks_mut(&mut self) -> Vec<(&mut Vec<f64>, &mut Vec<f64>)> {
        match self {
            Layer::Linear(l) => {
                let mut v = vec![(&mut l.weight, &mut l.grad_weight)];
                if let (Some(b), Some(g)) = (&mut l.bias, &mut l.grad_bias) {
                    v.push((b, g));
                }
                v
            }
            Layer::BatchNorm(l) => vec![
                (&mut l.gamma, &mut l.grad_gamma),
                (&mut l.beta, &mut l.grad_beta),
            ],
            Layer::Relu(_) | Layer::MaxPool(_) => Vec::new(),
        }
    }
}
