//! A small shared-weight feed-forward network with explicit reverse-mode
//! gradients and an adaptive moment optimizer. No learning framework: the
//! whole training path is plain `f64` arithmetic, which keeps runs
//! reproducible bit for bit.

use crate::curves::{normalize_sample, PointSample};
use crate::groups::GroupKind;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("training divergence: {0}")]
    Divergence(String),
    #[error("model i/o failed for {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("model file {path} is corrupt: {source}")]
    Corrupt {
        path: String,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// Smooth, tanh-like saturation.
    Tanh,
    /// Rectified linear.
    Relu,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the post-activation value.
    fn derivative_from_output(&self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Architecture of the scalar-output network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, activation: Activation) -> Self {
        MlpSpec {
            input_dim,
            hidden_dims,
            activation,
        }
    }

    fn validate(&self) -> Result<(), NetError> {
        if self.input_dim == 0 {
            return Err(NetError::InvalidSpec("input_dim must be positive".into()));
        }
        if self.hidden_dims.iter().any(|d| *d == 0) {
            return Err(NetError::InvalidSpec("hidden dims must be positive".into()));
        }
        Ok(())
    }
}

/// One dense layer: `rows x cols` row-major weights plus a bias per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(rows: usize, cols: usize) -> Self {
        Layer {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }
}

/// All parameters of the network; also reused as the gradient container
/// (same shapes, elementwise semantics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    pub fn zeros_like(&self) -> MlpParams {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.rows, l.cols))
                .collect(),
        }
    }

    /// `self += scale * other`, layer by layer.
    pub fn add_scaled(&mut self, other: &MlpParams, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(other.layers.iter()) {
            for (x, y) in a.weights.iter_mut().zip(b.weights.iter()) {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(b.bias.iter()) {
                *x += scale * y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|w| w.is_finite()) && l.bias.iter().all(|b| b.is_finite())
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }
}

/// Initializes weights uniform on [-sqrt(3/fan_in), sqrt(3/fan_in)], which
/// targets a weight variance of exactly 1/fan_in; biases start at zero.
pub fn mlp_init<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Result<MlpParams, NetError> {
    spec.validate()?;
    let mut dims = vec![spec.input_dim];
    dims.extend_from_slice(&spec.hidden_dims);
    dims.push(1);
    let layers = dims
        .windows(2)
        .map(|w| {
            let (cols, rows) = (w[0], w[1]);
            let bound = (3.0 / cols as f64).sqrt();
            Layer {
                rows,
                cols,
                weights: (0..rows * cols)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
                bias: vec![0.0; rows],
            }
        })
        .collect();
    Ok(MlpParams { layers })
}

fn matvec(layer: &Layer, input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for (row, b) in layer.weights.chunks_exact(layer.cols).zip(layer.bias.iter()) {
        let mut acc = *b;
        for (w, x) in row.iter().zip(input.iter()) {
            acc += w * x;
        }
        out.push(acc);
    }
}

/// Post-activation values of every layer, kept for the backward pass.
/// `values[0]` is the input; the last entry is the scalar output.
pub struct ForwardCache {
    values: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> f64 {
        self.values.last().expect("cache never empty")[0]
    }
}

pub fn mlp_forward_cached(
    spec: &MlpSpec,
    params: &MlpParams,
    input: &[f64],
) -> Result<ForwardCache, NetError> {
    if input.len() != spec.input_dim {
        return Err(NetError::ShapeMismatch(format!(
            "input length {} does not match spec input_dim {}",
            input.len(),
            spec.input_dim
        )));
    }
    let n_layers = params.layers.len();
    let mut values = Vec::with_capacity(n_layers + 1);
    values.push(input.to_vec());
    let mut buf = Vec::new();
    for (li, layer) in params.layers.iter().enumerate() {
        if layer.cols != values[li].len() {
            return Err(NetError::ShapeMismatch(format!(
                "layer {li} expects {} inputs, got {}",
                layer.cols,
                values[li].len()
            )));
        }
        matvec(layer, &values[li], &mut buf);
        if li + 1 < n_layers {
            for z in buf.iter_mut() {
                *z = spec.activation.apply(*z);
            }
        }
        values.push(buf.clone());
    }
    Ok(ForwardCache { values })
}

/// Deterministic scalar output for one flattened sample.
pub fn mlp_forward(spec: &MlpSpec, params: &MlpParams, input: &[f64]) -> Result<f64, NetError> {
    Ok(mlp_forward_cached(spec, params, input)?.output())
}

/// Exact reverse-mode gradients of `upstream * output` with respect to every
/// parameter. Also returns the gradient with respect to the input.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &MlpParams,
    cache: &ForwardCache,
    upstream: f64,
) -> (MlpParams, Vec<f64>) {
    let n_layers = params.layers.len();
    let mut grads = params.zeros_like();
    let mut delta = vec![upstream];
    for li in (0..n_layers).rev() {
        let layer = &params.layers[li];
        let input = &cache.values[li];
        let grad_layer = &mut grads.layers[li];
        for (r, d) in delta.iter().enumerate() {
            grad_layer.bias[r] = *d;
            let row = &mut grad_layer.weights[r * layer.cols..(r + 1) * layer.cols];
            for (g, x) in row.iter_mut().zip(input.iter()) {
                *g = d * x;
            }
        }
        // delta for the previous layer: W^T delta, gated by the activation
        // derivative (the input layer has no activation).
        let mut prev = vec![0.0; layer.cols];
        for (r, d) in delta.iter().enumerate() {
            let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
            for (p, w) in prev.iter_mut().zip(row.iter()) {
                *p += w * d;
            }
        }
        if li > 0 {
            for (p, a) in prev.iter_mut().zip(cache.values[li].iter()) {
                *p *= spec.activation.derivative_from_output(*a);
            }
        }
        delta = prev;
    }
    (grads, delta)
}

/// Hyperparameters of the adaptive moment optimizer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Step count plus first/second moment accumulators matching the parameters.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    m: MlpParams,
    v: MlpParams,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, params: &MlpParams) -> Self {
        OptimizerState {
            config,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    /// One bias-corrected adaptive moment update, in place.
    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpParams) -> Result<(), NetError> {
        if !grads.is_finite() {
            return Err(NetError::Divergence(format!(
                "non-finite gradient at optimizer step {}",
                self.step + 1
            )));
        }
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for ((pl, gl), (ml, vl)) in params
            .layers
            .iter_mut()
            .zip(grads.layers.iter())
            .zip(self.m.layers.iter_mut().zip(self.v.layers.iter_mut()))
        {
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            };
            for i in 0..pl.weights.len() {
                update(&mut pl.weights[i], gl.weights[i], &mut ml.weights[i], &mut vl.weights[i]);
            }
            for i in 0..pl.bias.len() {
                update(&mut pl.bias[i], gl.bias[i], &mut ml.bias[i], &mut vl.bias[i]);
            }
        }
        if !params.is_finite() {
            return Err(NetError::Divergence(format!(
                "non-finite parameters after optimizer step {}",
                self.step
            )));
        }
        Ok(())
    }
}

/// What a trained network estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTask {
    Curvature,
    ArcLength,
}

/// Training provenance stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub task: ModelTask,
    pub group: GroupKind,
    /// Points per side of a curvature neighborhood, or points per arc-length
    /// section.
    pub window: usize,
    pub dataset_id: String,
    pub trained_steps: u64,
    pub seed: u64,
}

/// A complete model file: spec, parameters and training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub spec: MlpSpec,
    pub params: MlpParams,
    pub meta: ModelMeta,
}

impl TrainedModel {
    pub fn new(spec: MlpSpec, params: MlpParams, meta: ModelMeta) -> Self {
        TrainedModel {
            version: 1,
            spec,
            params,
            meta,
        }
    }

    /// Sample window length this model expects.
    pub fn sample_len(&self) -> usize {
        match self.meta.task {
            ModelTask::Curvature => 2 * self.meta.window + 1,
            ModelTask::ArcLength => self.meta.window,
        }
    }

    /// Normalizes a raw window and evaluates the network on it.
    pub fn eval_sample(&self, sample: &PointSample) -> Result<f64, NetError> {
        let normalized = normalize_sample(sample)
            .map_err(|e| NetError::ShapeMismatch(format!("sample rejected: {e}")))?;
        mlp_forward(&self.spec, &self.params, &normalized.flatten())
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        let text = serde_json::to_string(self).expect("model serialization is infallible");
        std::fs::write(path, text).map_err(|source| NetError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        let text = std::fs::read_to_string(path).map_err(|source| NetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| NetError::Corrupt {
            path: path.display().to_string(),
            source,
        })
    }
}
