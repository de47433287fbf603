use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A trainable slice of parameters together with its accumulated gradient.
pub struct Param<'a> {
    pub name: String,
    pub value: &'a mut [f64],
    pub grad: &'a [f64],
}

/// Shape-level description of a layer, used for architecture introspection
/// and checkpoint headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize },
    LeakyRelu { alpha: f64 },
    BatchNorm { dim: usize, momentum: f64, epsilon: f64 },
    Dropout { rate: f64 },
    Sigmoid,
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub(crate) weights: Tensor2,
    pub(crate) bias: Vec<f64>,
    grad_w: Tensor2,
    grad_b: Vec<f64>,
    input: Option<Tensor2>,
}

impl Dense {
    pub fn new(weights: Tensor2, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(Error::shape("Dense::new", weights.cols(), bias.len()));
        }
        let (i, o) = weights.shape();
        Ok(Self {
            grad_w: Tensor2::zeros(i, o),
            grad_b: vec![0.0; o],
            weights,
            bias,
            input: None,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        let weights = Tensor2::from_vec(inputs, outputs, data).expect("sized above");
        Self::new(weights, vec![0.0; outputs]).expect("sized above")
    }

    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Tensor2 {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn apply(&self, input: &Tensor2) -> Result<Tensor2> {
        if input.cols() != self.inputs() {
            return Err(Error::shape("dense_forward", self.inputs(), input.cols()));
        }
        let mut out = input.matmul(&self.weights)?;
        for r in 0..out.rows() {
            for (v, b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(out)
    }

    fn forward(&mut self, input: &Tensor2, mode: Mode) -> Result<Tensor2> {
        let out = self.apply(input)?;
        self.input = (mode == Mode::Train).then(|| input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor2) -> Result<Tensor2> {
        let input = self.input.as_ref().ok_or_else(|| {
            Error::Parameter("dense backward called without a training forward".into())
        })?;
        self.grad_w = input.t_matmul(grad_out)?;
        self.grad_b = grad_out.sum_rows();
        grad_out.matmul_t(&self.weights)
    }
}

#[derive(Debug, Clone)]
pub struct LeakyRelu {
    pub alpha: f64,
    input: Option<Tensor2>,
}

impl LeakyRelu {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, input: None }
    }

    fn forward(&mut self, input: &Tensor2, mode: Mode) -> Tensor2 {
        self.input = (mode == Mode::Train).then(|| input.clone());
        leaky_relu(input, self.alpha)
    }

    fn backward(&mut self, grad_out: &Tensor2) -> Result<Tensor2> {
        let input = self
            .input
            .as_ref()
            .ok_or_else(|| Error::Parameter("leaky_relu backward without forward".into()))?;
        let mut g = grad_out.clone();
        for (gv, &x) in g.data_mut().iter_mut().zip(input.data()) {
            if x < 0.0 {
                *gv *= self.alpha;
            }
        }
        Ok(g)
    }
}

pub fn leaky_relu(x: &Tensor2, alpha: f64) -> Tensor2 {
    x.map(|v| if v >= 0.0 { v } else { alpha * v })
}

const SIGMOID_LOW: f64 = f64::MIN_POSITIVE;
const SIGMOID_HIGH: f64 = 1.0 - f64::EPSILON / 2.0;

fn sigmoid_scalar(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    // Keep the result strictly inside (0, 1) even when it rounds to an endpoint.
    s.clamp(SIGMOID_LOW, SIGMOID_HIGH)
}

pub fn sigmoid(x: &Tensor2) -> Tensor2 {
    x.map(sigmoid_scalar)
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid {
    output: Option<Tensor2>,
}

impl Sigmoid {
    fn forward(&mut self, input: &Tensor2, mode: Mode) -> Tensor2 {
        let out = sigmoid(input);
        self.output = (mode == Mode::Train).then(|| out.clone());
        out
    }

    fn backward(&mut self, grad_out: &Tensor2) -> Result<Tensor2> {
        let out = self
            .output
            .as_ref()
            .ok_or_else(|| Error::Parameter("sigmoid backward without forward".into()))?;
        let mut g = grad_out.clone();
        for (gv, &s) in g.data_mut().iter_mut().zip(out.data()) {
            *gv *= s * (1.0 - s);
        }
        Ok(g)
    }
}

#[derive(Debug, Clone)]
struct BatchCache {
    normalized: Tensor2,
    inv_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub(crate) gamma: Vec<f64>,
    pub(crate) beta: Vec<f64>,
    pub(crate) running_mean: Vec<f64>,
    pub(crate) running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
    grad_gamma: Vec<f64>,
    grad_beta: Vec<f64>,
    cache: Option<BatchCache>,
    infer_inv_std: Option<Vec<f64>>,
}

impl BatchNorm {
    pub const DEFAULT_EPSILON: f64 = 1e-5;

    pub fn new(dim: usize, momentum: f64, epsilon: f64) -> Result<Self> {
        if !(momentum > 0.0 && momentum < 1.0) {
            return Err(Error::Parameter(format!(
                "batchnorm momentum {momentum} outside (0, 1)"
            )));
        }
        Ok(Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum,
            epsilon,
            grad_gamma: vec![0.0; dim],
            grad_beta: vec![0.0; dim],
            cache: None,
            infer_inv_std: None,
        })
    }

    pub fn with_affine(mut self, gamma: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if gamma.len() != self.dim() || beta.len() != self.dim() {
            return Err(Error::shape("BatchNorm::with_affine", self.dim(), gamma.len()));
        }
        self.gamma = gamma;
        self.beta = beta;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn running_mean(&self) -> &[f64] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[f64] {
        &self.running_var
    }

    fn forward(&mut self, input: &Tensor2, mode: Mode) -> Result<Tensor2> {
        let dim = self.dim();
        if input.cols() != dim {
            return Err(Error::shape("batchnorm_forward", dim, input.cols()));
        }
        let rows = input.rows();
        let mut out = Tensor2::zeros(rows, dim);
        match mode {
            Mode::Train => {
                if rows < 2 {
                    return Err(Error::DegenerateBatch { rows });
                }
                let n = rows as f64;
                let mean: Vec<f64> = input.sum_rows().into_iter().map(|s| s / n).collect();
                let mut var = vec![0.0; dim];
                for r in 0..rows {
                    for ((acc, &x), &m) in var.iter_mut().zip(input.row(r)).zip(&mean) {
                        *acc += (x - m) * (x - m);
                    }
                }
                var.iter_mut().for_each(|v| *v /= n);
                let inv_std: Vec<f64> = var
                    .iter()
                    .map(|v| 1.0 / (v + self.epsilon).sqrt())
                    .collect();
                let mut normalized = Tensor2::zeros(rows, dim);
                for r in 0..rows {
                    for c in 0..dim {
                        let xh = (input.get(r, c) - mean[c]) * inv_std[c];
                        normalized.set(r, c, xh);
                        out.set(r, c, self.gamma[c] * xh + self.beta[c]);
                    }
                }
                let m = self.momentum;
                for c in 0..dim {
                    self.running_mean[c] = m * self.running_mean[c] + (1.0 - m) * mean[c];
                    self.running_var[c] = m * self.running_var[c] + (1.0 - m) * var[c];
                }
                self.cache = Some(BatchCache {
                    normalized,
                    inv_std,
                });
                self.infer_inv_std = None;
            }
            Mode::Infer => {
                out = self.infer(input)?;
                self.cache = None;
                self.infer_inv_std = Some(
                    self.running_var
                        .iter()
                        .map(|v| 1.0 / (v + self.epsilon).sqrt())
                        .collect(),
                );
            }
        }
        Ok(out)
    }

    fn infer(&self, input: &Tensor2) -> Result<Tensor2> {
        if input.cols() != self.dim() {
            return Err(Error::shape("batchnorm_forward", self.dim(), input.cols()));
        }
        let inv_std: Vec<f64> = self
            .running_var
            .iter()
            .map(|v| 1.0 / (v + self.epsilon).sqrt())
            .collect();
        let mut out = input.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = self.gamma[c] * (*v - self.running_mean[c]) * inv_std[c] + self.beta[c];
            }
        }
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor2) -> Result<Tensor2> {
        let dim = self.dim();
        let rows = grad_out.rows();
        if let Some(inv_std) = &self.infer_inv_std {
            let mut g = grad_out.clone();
            for r in 0..rows {
                for (c, v) in g.row_mut(r).iter_mut().enumerate() {
                    *v *= self.gamma[c] * inv_std[c];
                }
            }
            return Ok(g);
        }
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Parameter("batchnorm backward without forward".into()))?;
        let n = rows as f64;
        let mut sum_dy = vec![0.0; dim];
        let mut sum_dy_xh = vec![0.0; dim];
        for r in 0..rows {
            for c in 0..dim {
                let dy = grad_out.get(r, c);
                sum_dy[c] += dy;
                sum_dy_xh[c] += dy * cache.normalized.get(r, c);
            }
        }
        let mut grad_in = Tensor2::zeros(rows, dim);
        for r in 0..rows {
            for c in 0..dim {
                let xh = cache.normalized.get(r, c);
                let dxh_scale = self.gamma[c] * cache.inv_std[c] / n;
                let v = dxh_scale * (n * grad_out.get(r, c) - sum_dy[c] - xh * sum_dy_xh[c]);
                grad_in.set(r, c, v);
            }
        }
        self.grad_gamma = sum_dy_xh;
        self.grad_beta = sum_dy;
        Ok(grad_in)
    }
}

/// Runs a batch-normalization layer in training or inference mode.
///
/// Training mode normalizes with batch statistics and folds them into the
/// running estimates; inference mode uses the running estimates only.
pub fn batchnorm_forward(layer: &mut BatchNorm, input: &Tensor2, training: bool) -> Result<Tensor2> {
    let mode = if training { Mode::Train } else { Mode::Infer };
    layer.forward(input, mode)
}

#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        check_dropout_rate(rate)?;
        Ok(Self { rate, mask: None })
    }

    fn forward(&mut self, input: &Tensor2, mode: Mode, rng: &mut Rng) -> Tensor2 {
        if mode == Mode::Infer || self.rate == 0.0 {
            self.mask = None;
            return input.clone();
        }
        let keep = 1.0 / (1.0 - self.rate);
        let mask: Vec<f64> = (0..input.data().len())
            .map(|_| if rng.uniform() < self.rate { 0.0 } else { keep })
            .collect();
        let mut out = input.clone();
        for (v, m) in out.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(mask);
        out
    }

    fn backward(&mut self, grad_out: &Tensor2) -> Tensor2 {
        let mut g = grad_out.clone();
        if let Some(mask) = &self.mask {
            for (v, m) in g.data_mut().iter_mut().zip(mask) {
                *v *= m;
            }
        }
        g
    }
}

fn check_dropout_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` so inference is
/// the identity.
pub fn dropout(input: &Tensor2, rate: f64, training: bool, rng: &mut Rng) -> Result<Tensor2> {
    let mut layer = Dropout::new(rate)?;
    let mode = if training { Mode::Train } else { Mode::Infer };
    Ok(layer.forward(input, mode, rng))
}

pub fn dense_forward(layer: &Dense, input: &Tensor2) -> Result<Tensor2> {
    layer.apply(input)
}

#[derive(Debug, Clone)]
pub enum Layer {
    Dense(Dense),
    LeakyRelu(LeakyRelu),
    BatchNorm(BatchNorm),
    Dropout(Dropout),
    Sigmoid(Sigmoid),
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::Dense {
                inputs: d.inputs(),
                outputs: d.outputs(),
            },
            Layer::LeakyRelu(l) => LayerSpec::LeakyRelu { alpha: l.alpha },
            Layer::BatchNorm(b) => LayerSpec::BatchNorm {
                dim: b.dim(),
                momentum: b.momentum,
                epsilon: b.epsilon,
            },
            Layer::Dropout(d) => LayerSpec::Dropout { rate: d.rate },
            Layer::Sigmoid(_) => LayerSpec::Sigmoid,
        }
    }

    pub fn forward(&mut self, input: &Tensor2, mode: Mode, rng: &mut Rng) -> Result<Tensor2> {
        match self {
            Layer::Dense(d) => d.forward(input, mode),
            Layer::LeakyRelu(l) => Ok(l.forward(input, mode)),
            Layer::BatchNorm(b) => b.forward(input, mode),
            Layer::Dropout(d) => Ok(d.forward(input, mode, rng)),
            Layer::Sigmoid(s) => Ok(s.forward(input, mode)),
        }
    }

    /// Inference-mode forward pass that leaves no cached state behind.
    pub fn infer(&self, input: &Tensor2) -> Result<Tensor2> {
        match self {
            Layer::Dense(d) => d.apply(input),
            Layer::LeakyRelu(l) => Ok(leaky_relu(input, l.alpha)),
            Layer::BatchNorm(b) => b.infer(input),
            Layer::Dropout(_) => Ok(input.clone()),
            Layer::Sigmoid(_) => Ok(sigmoid(input)),
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor2) -> Result<Tensor2> {
        match self {
            Layer::Dense(d) => d.backward(grad_out),
            Layer::LeakyRelu(l) => l.backward(grad_out),
            Layer::BatchNorm(b) => b.backward(grad_out),
            Layer::Dropout(d) => Ok(d.backward(grad_out)),
            Layer::Sigmoid(s) => s.backward(grad_out),
        }
    }

    fn params(&mut self, index: usize) -> Vec<Param<'_>> {
        match self {
            Layer::Dense(d) => vec![
                Param {
                    name: format!("layer{index}.dense.weights"),
                    value: d.weights.data_mut(),
                    grad: d.grad_w.data(),
                },
                Param {
                    name: format!("layer{index}.dense.bias"),
                    value: &mut d.bias,
                    grad: &d.grad_b,
                },
            ],
            Layer::BatchNorm(b) => vec![
                Param {
                    name: format!("layer{index}.batchnorm.gamma"),
                    value: &mut b.gamma,
                    grad: &b.grad_gamma,
                },
                Param {
                    name: format!("layer{index}.batchnorm.beta"),
                    value: &mut b.beta,
                    grad: &b.grad_beta,
                },
            ],
            _ => Vec::new(),
        }
    }
}

/// A feed-forward stack of layers with cached activations for backprop.
#[derive(Debug, Clone)]
pub struct Sequential {
    layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn infer(&self, input: &Tensor2) -> Result<Tensor2> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.infer(&x)?;
        }
        Ok(x)
    }

    pub fn forward(&mut self, input: &Tensor2, mode: Mode, rng: &mut Rng) -> Result<Tensor2> {
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, mode, rng)?;
        }
        Ok(x)
    }

    /// Backpropagates `grad_out` (gradient of the loss with respect to the
    /// last forward output), storing parameter gradients in each layer and
    /// returning the gradient with respect to the network input.
    pub fn backward(&mut self, grad_out: &Tensor2) -> Result<Tensor2> {
        let mut g = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn params(&mut self) -> Vec<Param<'_>> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| l.params(i))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => d.inputs() * d.outputs() + d.outputs(),
                Layer::BatchNorm(b) => 2 * b.dim(),
                _ => 0,
            })
            .sum()
    }
}
