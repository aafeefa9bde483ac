//! Feed-forward networks with tanh hidden units and hand-written backprop.
//!
//! Inputs are batched row-wise: a `[batch × in]` matrix maps to a
//! `[batch × out]` matrix. Weights are stored `[out × in]`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};

/// Output transform applied after the final affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    Linear,
    /// Logistic output in (0, 1).
    Sigmoid,
    /// Linear mean head plus a learnable, state-independent log-std vector.
    GaussianPolicy,
}

/// How biases start out. Weights are always Xavier-uniform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasInit {
    #[default]
    Zero,
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    FanInUniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    /// Xavier-uniform weights, zero bias.
    pub fn xavier(in_dim: usize, out_dim: usize, rng: &mut dyn RngCore) -> Self {
        Self::xavier_with_bias(in_dim, out_dim, BiasInit::Zero, rng)
    }

    pub fn xavier_with_bias(in_dim: usize, out_dim: usize, bias_init: BiasInit, rng: &mut dyn RngCore) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weight = Array2::from_shape_fn((out_dim, in_dim), |_| rng.random_range(-limit..=limit));
        let bias = match bias_init {
            BiasInit::Zero => Array1::zeros(out_dim),
            BiasInit::FanInUniform => {
                let b = 1.0 / (in_dim as f64).sqrt();
                Array1::from_shape_fn(out_dim, |_| rng.random_range(-b..=b))
            }
        };
        Self { weight, bias }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Dense>,
    head: HeadKind,
    log_std: Option<Array1<f64>>,
}

/// Activations recorded by [`DenseNet::forward`], consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer: the network input followed by every hidden activation.
    layer_inputs: Vec<Array2<f64>>,
    /// Output of the last affine layer, before the head transform.
    pre_head: Array2<f64>,
}

impl ForwardCache {
    pub fn pre_head(&self) -> &Array2<f64> {
        &self.pre_head
    }

    pub fn batch_size(&self) -> usize {
        self.pre_head.nrows()
    }
}

/// Gradients shaped exactly like a [`DenseNet`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads {
    pub layers: Vec<Dense>,
    pub log_std: Option<Array1<f64>>,
}

impl NetGrads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense { weight: Array2::zeros(l.weight.raw_dim()), bias: Array1::zeros(l.bias.len()) })
                .collect(),
            log_std: net.log_std.as_ref().map(|v| Array1::zeros(v.len())),
        }
    }

    pub fn add_assign(&mut self, other: &NetGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
        if let (Some(a), Some(b)) = (self.log_std.as_mut(), other.log_std.as_ref()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weight *= factor;
            l.bias *= factor;
        }
        if let Some(v) = self.log_std.as_mut() {
            *v *= factor;
        }
    }

    /// Flattened in the same order as [`DenseNet::params_to_vec`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        if let Some(v) = &self.log_std {
            out.extend(v.iter().copied());
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.to_vec().iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.iter().chain(l.bias.iter()).all(|g| g.is_finite()))
            && self.log_std.as_ref().is_none_or(|v| v.iter().all(|g| g.is_finite()))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid kept strictly inside (0, 1) even when the logit saturates.
pub fn probability(logit: f64) -> f64 {
    sigmoid(logit).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl DenseNet {
    /// Builds a network `in_dim → hidden… → out_dim` with Xavier-uniform
    /// weights and zero biases. Gaussian-policy heads start with every
    /// log-std entry at `init_log_std`.
    pub fn new(
        in_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        head: HeadKind,
        init_log_std: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        Self::with_bias_init(in_dim, hidden, out_dim, head, init_log_std, BiasInit::Zero, rng)
    }

    /// [`DenseNet::new`] with a chosen bias initialization.
    pub fn with_bias_init(
        in_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        head: HeadKind,
        init_log_std: f64,
        bias_init: BiasInit,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 || hidden.contains(&0) {
            return shape_err("network dimensions must be >= 1");
        }
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(in_dim);
        dims.extend_from_slice(hidden);
        dims.push(out_dim);
        let layers = dims.windows(2).map(|w| Dense::xavier_with_bias(w[0], w[1], bias_init, rng)).collect();
        let log_std = (head == HeadKind::GaussianPolicy).then(|| Array1::from_elem(out_dim, init_log_std));
        Ok(Self { layers, head, log_std })
    }

    pub fn from_layers(layers: Vec<Dense>, head: HeadKind, log_std: Option<Array1<f64>>) -> Result<Self> {
        if layers.is_empty() {
            return shape_err("network needs at least one layer");
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return shape_err(format!("layer {k}: bias length {} != out dim {}", l.bias.len(), l.out_dim()));
            }
        }
        for (k, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return shape_err(format!(
                    "layer {k} outputs {} but layer {} expects {}",
                    w[0].out_dim(),
                    k + 1,
                    w[1].in_dim()
                ));
            }
        }
        let out_dim = layers.last().map(Dense::out_dim).unwrap_or(0);
        match (head, &log_std) {
            (HeadKind::GaussianPolicy, Some(v)) if v.len() == out_dim => {
                if v.iter().any(|x| !x.is_finite()) {
                    return shape_err("log-std entries must be finite");
                }
            }
            (HeadKind::GaussianPolicy, _) => return shape_err("gaussian head needs a log-std vector of output length"),
            (_, Some(_)) => return shape_err("log-std vector only valid for a gaussian head"),
            _ => {}
        }
        Ok(Self { layers, head, log_std })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn head(&self) -> HeadKind {
        self.head
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn log_std(&self) -> Option<&Array1<f64>> {
        self.log_std.as_ref()
    }

    pub fn log_std_mut(&mut self) -> Option<&mut Array1<f64>> {
        self.log_std.as_mut()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum::<usize>()
            + self.log_std.as_ref().map_or(0, |v| v.len())
    }

    pub fn forward(&self, inputs: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if inputs.ncols() != self.in_dim() {
            return shape_err(format!("input width {} != network input dim {}", inputs.ncols(), self.in_dim()));
        }
        let last = self.layers.len() - 1;
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut x = inputs.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            layer_inputs.push(x);
            if k < last {
                z.mapv_inplace(f64::tanh);
            }
            x = z;
        }
        let pre_head = x;
        let outputs = match self.head {
            HeadKind::Sigmoid => pre_head.mapv(probability),
            HeadKind::Linear | HeadKind::GaussianPolicy => pre_head.clone(),
        };
        Ok((outputs, ForwardCache { layer_inputs, pre_head }))
    }

    /// Forward pass without keeping the cache.
    pub fn predict(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.forward(inputs).map(|(out, _)| out)
    }

    /// Single-row convenience wrapper around [`DenseNet::predict`].
    pub fn predict_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| crate::Error::Shape(e.to_string()))?;
        Ok(self.predict(x)?.into_raw_vec_and_offset().0)
    }

    /// Backpropagates a gradient taken with respect to the network outputs
    /// (after the head transform).
    pub fn backward(&self, cache: &ForwardCache, grad_out: ArrayView2<f64>) -> Result<(NetGrads, Array2<f64>)> {
        self.check_cache(cache, grad_out)?;
        let grad_pre = match self.head {
            HeadKind::Sigmoid => {
                let mut g = grad_out.to_owned();
                Zip::from(&mut g).and(&cache.pre_head).for_each(|g, &z| {
                    let p = sigmoid(z);
                    *g *= p * (1.0 - p);
                });
                g
            }
            HeadKind::Linear | HeadKind::GaussianPolicy => grad_out.to_owned(),
        };
        self.backprop(cache, grad_pre)
    }

    /// Backpropagates a gradient taken with respect to the pre-head values
    /// (logits for a sigmoid head). Losses on probabilities should use this
    /// route for numerical stability.
    pub fn backward_pre_head(
        &self,
        cache: &ForwardCache,
        grad_pre_head: ArrayView2<f64>,
    ) -> Result<(NetGrads, Array2<f64>)> {
        self.check_cache(cache, grad_pre_head)?;
        self.backprop(cache, grad_pre_head.to_owned())
    }

    fn check_cache(&self, cache: &ForwardCache, grad: ArrayView2<f64>) -> Result<()> {
        if cache.layer_inputs.len() != self.layers.len()
            || cache.pre_head.ncols() != self.out_dim()
            || cache.layer_inputs.iter().zip(&self.layers).any(|(x, l)| x.ncols() != l.in_dim())
        {
            return shape_err("forward cache does not belong to this network");
        }
        if grad.dim() != cache.pre_head.dim() {
            return shape_err(format!(
                "upstream gradient shape {:?} != output shape {:?}",
                grad.dim(),
                cache.pre_head.dim()
            ));
        }
        Ok(())
    }

    fn backprop(&self, cache: &ForwardCache, mut delta: Array2<f64>) -> Result<(NetGrads, Array2<f64>)> {
        let mut grads = NetGrads::zeros_like(self);
        for k in (0..self.layers.len()).rev() {
            let input = &cache.layer_inputs[k];
            grads.layers[k].weight = delta.t().dot(input);
            grads.layers[k].bias = delta.sum_axis(Axis(0));
            let mut upstream = delta.dot(&self.layers[k].weight);
            if k > 0 {
                // `input` is tanh output of the previous layer.
                Zip::from(&mut upstream).and(input).for_each(|g, &h| *g *= 1.0 - h * h);
            }
            delta = upstream;
        }
        Ok((grads, delta))
    }

    /// All parameters flattened: per layer weights (row-major) then bias,
    /// followed by the log-std vector if present.
    pub fn params_to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        if let Some(v) = &self.log_std {
            out.extend(v.iter().copied());
        }
        out
    }

    pub fn set_params_from_slice(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return shape_err(format!("expected {} parameters, got {}", self.num_params(), params.len()));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|w| *w = it.next().unwrap_or_default());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap_or_default());
        }
        if let Some(v) = &mut self.log_std {
            v.iter_mut().for_each(|x| *x = it.next().unwrap_or_default());
        }
        Ok(())
    }
}
