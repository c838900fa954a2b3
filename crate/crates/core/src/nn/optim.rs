//! SGD-with-momentum and Adam over slices of dense layers. Accumulator
//! shapes always mirror the parameter shapes; a shape change between steps
//! is an error rather than a silent reset.

use serde::{Deserialize, Serialize};

use super::{DenseLayer, LayerGrads, Mat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    SgdMomentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

#[derive(Debug, Clone)]
struct Slot {
    // first moment / momentum buffer
    m_weight: Mat,
    m_bias: Vec<f64>,
    // second moment (Adam only)
    v_weight: Mat,
    v_bias: Vec<f64>,
}

impl Slot {
    fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            m_weight: Mat::zeros(layer.out_dim(), layer.in_dim()),
            m_bias: vec![0.0; layer.out_dim()],
            v_weight: Mat::zeros(layer.out_dim(), layer.in_dim()),
            v_bias: vec![0.0; layer.out_dim()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    slots: Vec<Slot>,
    step_count: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if learning_rate <= 0.0 || !learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if weight_decay < 0.0 {
            return Err(Error::InvalidParameter("weight decay must be >= 0".into()));
        }
        Ok(Self {
            kind,
            learning_rate,
            weight_decay,
            slots: Vec::new(),
            step_count: 0,
        })
    }

    pub fn sgd_momentum(learning_rate: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        Self::new(OptimizerKind::SgdMomentum { momentum }, learning_rate, weight_decay)
    }

    pub fn adam(learning_rate: f64, weight_decay: f64) -> Result<Self> {
        Self::new(
            OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                epsilon: 1e-8,
            },
            learning_rate,
            weight_decay,
        )
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.learning_rate = lr;
    }

    /// Applies one update to `layers` given matching `grads`.
    pub fn step(&mut self, layers: &mut [DenseLayer], grads: &[LayerGrads]) -> Result<()> {
        if layers.len() != grads.len() {
            return Err(Error::Shape(format!(
                "{} layers but {} gradient blocks",
                layers.len(),
                grads.len()
            )));
        }
        if self.slots.is_empty() {
            self.slots = layers.iter().map(Slot::zeros_like).collect();
        }
        if self.slots.len() != layers.len() {
            return Err(Error::Shape("optimizer state does not match layer count".into()));
        }
        for ((layer, grad), slot) in layers.iter().zip(grads).zip(&self.slots) {
            if grad.weight.rows() != layer.out_dim()
                || grad.weight.cols() != layer.in_dim()
                || grad.bias.len() != layer.bias.len()
                || slot.m_weight.rows() != layer.out_dim()
                || slot.m_weight.cols() != layer.in_dim()
            {
                return Err(Error::Shape("gradient/parameter shape mismatch".into()));
            }
        }
        self.step_count += 1;
        let lr = self.learning_rate;
        let wd = self.weight_decay;
        match self.kind {
            OptimizerKind::SgdMomentum { momentum } => {
                for ((layer, grad), slot) in layers.iter_mut().zip(grads).zip(&mut self.slots) {
                    sgd_update(
                        layer.weight.as_mut_slice(),
                        grad.weight.as_slice(),
                        slot.m_weight.as_mut_slice(),
                        lr,
                        momentum,
                        wd,
                    );
                    sgd_update(&mut layer.bias, &grad.bias, &mut slot.m_bias, lr, momentum, wd);
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let t = self.step_count as i32;
                let bias1 = 1.0 - beta1.powi(t);
                let bias2 = 1.0 - beta2.powi(t);
                for ((layer, grad), slot) in layers.iter_mut().zip(grads).zip(&mut self.slots) {
                    adam_update(
                        layer.weight.as_mut_slice(),
                        grad.weight.as_slice(),
                        slot.m_weight.as_mut_slice(),
                        slot.v_weight.as_mut_slice(),
                        lr,
                        beta1,
                        beta2,
                        epsilon,
                        bias1,
                        bias2,
                        wd,
                    );
                    adam_update(
                        &mut layer.bias,
                        &grad.bias,
                        &mut slot.m_bias,
                        &mut slot.v_bias,
                        lr,
                        beta1,
                        beta2,
                        epsilon,
                        bias1,
                        bias2,
                        wd,
                    );
                }
            }
        }
        Ok(())
    }
}

fn sgd_update(params: &mut [f64], grads: &[f64], buf: &mut [f64], lr: f64, momentum: f64, wd: f64) {
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(buf) {
        let g = g + wd * *p;
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    bias1: f64,
    bias2: f64,
    wd: f64,
) {
    for (((p, &g), mi), vi) in params.iter_mut().zip(grads).zip(m).zip(v) {
        let g = g + wd * *p;
        *mi = beta1 * *mi + (1.0 - beta1) * g;
        *vi = beta2 * *vi + (1.0 - beta2) * g * g;
        let m_hat = *mi / bias1;
        let v_hat = *vi / bias2;
        *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
}
