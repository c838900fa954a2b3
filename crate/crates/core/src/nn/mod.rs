//! Minimal deterministic dense-network engine: forward, backward,
//! optimizers, temperature-scaled softmax, cross-entropy. 64-bit floats
//! throughout so gradients can be checked against central finite
//! differences.

mod checkpoint;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use optim::{Optimizer, OptimizerKind};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix. Weight matrices are `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// self · x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(x).map(|(w, xi)| w * xi).sum();
        }
        out
    }

    /// selfᵀ · v
    pub fn t_matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * vi;
            }
        }
        out
    }

    /// self += s · u·vᵀ
    pub fn add_scaled_outer(&mut self, u: &[f64], v: &[f64], s: f64) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (i, &ui) in u.iter().enumerate() {
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (w, &vj) in row.iter_mut().zip(v) {
                *w += s * ui * vj;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// derivative as a function of the pre-activation
    fn grad(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Mat,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Mat, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weight.rows() != bias.len() {
            return Err(Error::Shape(format!(
                "bias length {} does not match weight rows {}",
                bias.len(),
                weight.rows()
            )));
        }
        if weight.as_slice().iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite layer parameter".into()));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.weight.matvec(x);
        for (zi, b) in z.iter_mut().zip(&self.bias) {
            *zi += b;
        }
        z
    }
}

/// Backbone network: a stack of dense layers with chained dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<DenseLayer>,
    /// Frozen nets accumulate no gradients (training stages that only fit a
    /// head set this).
    #[serde(skip)]
    pub frozen: bool,
}

impl DenseNet {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer dims do not chain: {} -> {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self {
            layers,
            frozen: false,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }
}

/// Prediction head: one linear readout plus a softmax temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub linear: DenseLayer,
    pub temperature: f64,
}

impl Head {
    pub fn new(linear: DenseLayer, temperature: f64) -> Result<Self> {
        if temperature <= 0.0 || !temperature.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        if linear.activation != Activation::Identity {
            return Err(Error::InvalidParameter(
                "head readout must be a linear (identity-activation) layer".into(),
            ));
        }
        Ok(Self {
            linear,
            temperature,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.linear.out_dim()
    }
}

/// Uniform ±1/√fan_in initialization for every layer, ReLU on hidden layers.
/// `dims` = [input, hidden..., feature].
pub fn init_dense_net(dims: &[usize], rng: &mut impl Rng) -> Result<DenseNet> {
    if dims.len() < 2 {
        return Err(Error::InvalidParameter(
            "backbone needs at least input and feature dims".into(),
        ));
    }
    let layers = dims
        .windows(2)
        .map(|w| init_layer(w[0], w[1], Activation::Relu, rng))
        .collect();
    DenseNet::new(layers)
}

pub fn init_head(
    feature_dim: usize,
    n_classes: usize,
    temperature: f64,
    rng: &mut impl Rng,
) -> Result<Head> {
    Head::new(
        init_layer(feature_dim, n_classes, Activation::Identity, rng),
        temperature,
    )
}

fn init_layer(in_dim: usize, out_dim: usize, act: Activation, rng: &mut impl Rng) -> DenseLayer {
    let bound = 1.0 / (in_dim as f64).sqrt();
    let weight = Mat::from_fn(out_dim, in_dim, |_, _| rng.random_range(-bound..bound));
    let bias = (0..out_dim)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    DenseLayer {
        weight,
        bias,
        activation: act,
    }
}

/// Temperature-scaled softmax with max-subtraction for stability.
pub fn softmax_temp(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "softmax temperature must be positive, got {temperature}"
        )));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidInput("non-finite logit".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| ((l - max) / temperature).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Softmax at τ = 1.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    softmax_temp(logits, 1.0)
}

const PROB_FLOOR: f64 = 1e-12;

fn validate_distribution(probs: &[f64]) -> Result<()> {
    if probs.is_empty() || probs.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p)) {
        return Err(Error::InvalidInput("not a probability vector".into()));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "probabilities sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// −log p(true class), with p clamped at 1e-12. `label` is a one-hot vector.
pub fn cross_entropy(probs: &[f64], label: &[f64]) -> Result<f64> {
    validate_distribution(probs)?;
    if label.len() != probs.len() {
        return Err(Error::InvalidInput("label length mismatch".into()));
    }
    let mut hot = None;
    for (i, &l) in label.iter().enumerate() {
        if l == 1.0 {
            if hot.replace(i).is_some() {
                return Err(Error::InvalidInput("label has more than one hot entry".into()));
            }
        } else if l != 0.0 {
            return Err(Error::InvalidInput("label entries must be 0 or 1".into()));
        }
    }
    let hot = hot.ok_or_else(|| Error::InvalidInput("label has no hot entry".into()))?;
    Ok(-probs[hot].max(PROB_FLOOR).ln())
}

/// Cross-entropy against a soft target distribution (mixed labels from
/// augmentation): −Σ t·log p.
pub fn cross_entropy_soft(probs: &[f64], target: &[f64]) -> Result<f64> {
    if target.len() != probs.len() {
        return Err(Error::InvalidInput("target length mismatch".into()));
    }
    Ok(target
        .iter()
        .zip(probs)
        .map(|(&t, &p)| if t == 0.0 { 0.0 } else { -t * p.max(PROB_FLOOR).ln() })
        .sum())
}

/// Everything the backward pass needs from one sample's forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// input to each backbone layer
    layer_inputs: Vec<Vec<f64>>,
    /// pre-activation of each backbone layer
    layer_preacts: Vec<Vec<f64>>,
    pub features: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Composition head(backbone(x)) with the head's own temperature.
pub fn forward(net: &DenseNet, head: &Head, x: &[f64]) -> Result<ForwardTrace> {
    if !net.layers.is_empty() && x.len() != net.in_dim() {
        return Err(Error::Shape(format!(
            "input dim {} does not match first layer dim {}",
            x.len(),
            net.in_dim()
        )));
    }
    let mut layer_inputs = Vec::with_capacity(net.layers.len());
    let mut layer_preacts = Vec::with_capacity(net.layers.len());
    let mut a = x.to_vec();
    for (idx, layer) in net.layers.iter().enumerate() {
        let z = layer.affine(&a);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite activation in backbone layer {idx}"
            )));
        }
        layer_inputs.push(std::mem::replace(
            &mut a,
            z.iter().map(|&zi| layer.activation.apply(zi)).collect(),
        ));
        layer_preacts.push(z);
    }
    let features = a;
    if features.len() != head.linear.in_dim() {
        return Err(Error::Shape(format!(
            "feature dim {} does not match head dim {}",
            features.len(),
            head.linear.in_dim()
        )));
    }
    let logits = head.linear.affine(&features);
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite logit in head".into()));
    }
    let probs = softmax_temp(&logits, head.temperature)?;
    Ok(ForwardTrace {
        layer_inputs,
        layer_preacts,
        features,
        logits,
        probs,
    })
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weight: Mat,
    pub bias: Vec<f64>,
}

impl LayerGrads {
    fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weight: Mat::zeros(layer.out_dim(), layer.in_dim()),
            bias: vec![0.0; layer.out_dim()],
        }
    }
}

/// Gradients for one backbone + head. `backbone` is None when the net is
/// frozen.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub backbone: Option<Vec<LayerGrads>>,
    pub head: LayerGrads,
}

/// Accumulates parameter gradients given ∂loss/∂logits for every sample.
/// This is the shared backprop core; loss-specific code only has to supply
/// the logit gradients.
pub fn backward_from_dlogits(
    net: &DenseNet,
    head: &Head,
    traces: &[ForwardTrace],
    dlogits: &[Vec<f64>],
) -> Result<GradientSet> {
    if traces.len() != dlogits.len() {
        return Err(Error::Shape("traces/dlogits length mismatch".into()));
    }
    let mut head_grads = LayerGrads::zeros_like(&head.linear);
    let mut backbone_grads: Option<Vec<LayerGrads>> = if net.frozen {
        None
    } else {
        Some(net.layers.iter().map(LayerGrads::zeros_like).collect())
    };

    for (trace, dlogit) in traces.iter().zip(dlogits) {
        if dlogit.len() != head.n_classes() {
            return Err(Error::Shape("dlogit length mismatch".into()));
        }
        head_grads
            .weight
            .add_scaled_outer(dlogit, &trace.features, 1.0);
        for (b, d) in head_grads.bias.iter_mut().zip(dlogit) {
            *b += d;
        }
        let Some(ref mut grads) = backbone_grads else {
            continue;
        };
        let mut da = head.linear.weight.t_matvec(dlogit);
        for (idx, layer) in net.layers.iter().enumerate().rev() {
            let z = &trace.layer_preacts[idx];
            let dz: Vec<f64> = da
                .iter()
                .zip(z)
                .map(|(&dai, &zi)| dai * layer.activation.grad(zi))
                .collect();
            grads[idx]
                .weight
                .add_scaled_outer(&dz, &trace.layer_inputs[idx], 1.0);
            for (b, d) in grads[idx].bias.iter_mut().zip(&dz) {
                *b += d;
            }
            if idx > 0 {
                da = layer.weight.t_matvec(&dz);
            }
        }
    }
    Ok(GradientSet {
        backbone: backbone_grads,
        head: head_grads,
    })
}

/// Gradient of the weighted mean cross-entropy (1/N)·Σ wᵢ·ℓᵢ over a batch
/// of soft targets. Weights are treated as constants. Returns the gradient
/// set and the per-sample losses.
pub fn backward(
    net: &DenseNet,
    head: &Head,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    weights: &[f64],
) -> Result<(GradientSet, Vec<f64>)> {
    if inputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if inputs.len() != targets.len() || inputs.len() != weights.len() {
        return Err(Error::Shape("batch component lengths differ".into()));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample weight".into()));
    }
    let n = inputs.len() as f64;
    let mut traces = Vec::with_capacity(inputs.len());
    let mut losses = Vec::with_capacity(inputs.len());
    let mut dlogits = Vec::with_capacity(inputs.len());
    for ((x, t), &w) in inputs.iter().zip(targets).zip(weights) {
        let trace = forward(net, head, x)?;
        losses.push(cross_entropy_soft(&trace.probs, t)?);
        // d/dz of CE(softmax(z/τ), t) = (p − t)/τ
        let scale = w / (n * head.temperature);
        dlogits.push(
            trace
                .probs
                .iter()
                .zip(t)
                .map(|(&p, &ti)| scale * (p - ti))
                .collect(),
        );
        traces.push(trace);
    }
    let grads = backward_from_dlogits(net, head, &traces, &dlogits)?;
    Ok((grads, losses))
}
