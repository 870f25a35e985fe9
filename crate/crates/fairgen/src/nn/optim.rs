//! First-order optimizers over [`MlpModel`] parameters.
//!
//! One [`OptimizerState`] belongs to one model: accumulators are created
//! lazily on the first step and must keep matching the model's shapes.
//! `ascend` flips the direction of the applied update (gradient ascent
//! for the discriminator) while accumulating statistics of the raw
//! gradient either way.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::{Gradients, MlpModel};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    step_count: u64,
    /// First-moment (or momentum) accumulators, lazily shaped.
    m_weights: Vec<Matrix>,
    m_biases: Vec<Vec<f64>>,
    /// Second-moment accumulators; unused for SGD.
    v_weights: Vec<Matrix>,
    v_biases: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn sgd(learning_rate: f64, momentum: f64) -> Result<OptimizerState> {
        if !learning_rate.is_finite() || learning_rate < 0.0 {
            return Err(Error::param("learning_rate", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::param("momentum", "must lie in [0, 1)"));
        }
        Ok(OptimizerState::new(OptimizerKind::Sgd { momentum }, learning_rate))
    }

    /// Adam with the conventional defaults: beta1 0.9, beta2 0.999.
    pub fn adam(learning_rate: f64) -> Result<OptimizerState> {
        if !learning_rate.is_finite() || learning_rate < 0.0 {
            return Err(Error::param("learning_rate", "must be non-negative"));
        }
        Ok(OptimizerState::new(
            OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 },
            learning_rate,
        ))
    }

    fn new(kind: OptimizerKind, learning_rate: f64) -> OptimizerState {
        OptimizerState {
            kind,
            learning_rate,
            step_count: 0,
            m_weights: Vec::new(),
            m_biases: Vec::new(),
            v_weights: Vec::new(),
            v_biases: Vec::new(),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.learning_rate = lr;
    }

    fn ensure_shapes(&mut self, model: &MlpModel) -> Result<()> {
        if self.m_weights.is_empty() {
            self.m_weights = model
                .weights()
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect();
            self.m_biases = model.biases().iter().map(|b| vec![0.0; b.len()]).collect();
            if matches!(self.kind, OptimizerKind::Adam { .. }) {
                self.v_weights = self.m_weights.clone();
                self.v_biases = self.m_biases.clone();
            }
            return Ok(());
        }
        let matches = self.m_weights.len() == model.weights().len()
            && self
                .m_weights
                .iter()
                .zip(model.weights())
                .all(|(m, w)| m.rows() == w.rows() && m.cols() == w.cols());
        if !matches {
            return Err(Error::Usage(
                "optimizer state was initialized for a different model".into(),
            ));
        }
        Ok(())
    }
}

/// Applies one update. Gradient shapes must match the model; `ascend`
/// moves parameters up the gradient instead of down.
pub fn optimizer_step(
    opt: &mut OptimizerState,
    model: &mut MlpModel,
    grads: &Gradients,
    ascend: bool,
) -> Result<()> {
    if grads.weights.len() != model.weights().len()
        || grads
            .weights
            .iter()
            .zip(model.weights())
            .any(|(g, w)| g.rows() != w.rows() || g.cols() != w.cols())
        || grads
            .biases
            .iter()
            .zip(model.biases())
            .any(|(g, b)| g.len() != b.len())
    {
        return Err(Error::Usage(
            "gradient shapes do not match the model being stepped".into(),
        ));
    }
    opt.ensure_shapes(model)?;
    opt.step_count += 1;
    let lr = opt.learning_rate;
    let sign = if ascend { 1.0 } else { -1.0 };
    let layers = model.weights().len();
    let (weights, biases) = model.params_mut();
    match opt.kind {
        OptimizerKind::Sgd { momentum } => {
            for l in 0..layers {
                let vel = opt.m_weights[l].data_mut();
                let w = weights[l].data_mut();
                for ((wv, vv), &g) in w.iter_mut().zip(vel.iter_mut()).zip(grads.weights[l].data()) {
                    *vv = momentum * *vv + g;
                    *wv += sign * lr * *vv;
                }
                for ((bv, vv), &g) in biases[l]
                    .iter_mut()
                    .zip(opt.m_biases[l].iter_mut())
                    .zip(&grads.biases[l])
                {
                    *vv = momentum * *vv + g;
                    *bv += sign * lr * *vv;
                }
            }
        }
        OptimizerKind::Adam { beta1, beta2, epsilon } => {
            let t = opt.step_count as i32;
            let bc1 = 1.0 - beta1.powi(t);
            let bc2 = 1.0 - beta2.powi(t);
            for l in 0..layers {
                let m = opt.m_weights[l].data_mut();
                let v = opt.v_weights[l].data_mut();
                let w = weights[l].data_mut();
                for (((wv, mv), vv), &g) in
                    w.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(grads.weights[l].data())
                {
                    *mv = beta1 * *mv + (1.0 - beta1) * g;
                    *vv = beta2 * *vv + (1.0 - beta2) * g * g;
                    let update = (*mv / bc1) / ((*vv / bc2).sqrt() + epsilon);
                    *wv += sign * lr * update;
                }
                for (((bv, mv), vv), &g) in biases[l]
                    .iter_mut()
                    .zip(opt.m_biases[l].iter_mut())
                    .zip(opt.v_biases[l].iter_mut())
                    .zip(&grads.biases[l])
                {
                    *mv = beta1 * *mv + (1.0 - beta1) * g;
                    *vv = beta2 * *vv + (1.0 - beta2) * g * g;
                    let update = (*mv / bc1) / ((*vv / bc2).sqrt() + epsilon);
                    *bv += sign * lr * update;
                }
            }
        }
    }
    Ok(())
}
