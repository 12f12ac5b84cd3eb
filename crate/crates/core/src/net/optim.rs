use serde::{Deserialize, Serialize};

use super::{BinaryNetwork, Gradients};
use crate::error::{Error, Result};

/// Inner SGD settings. Defaults are the full-scale values; desk runs shrink
/// the epoch count, decay period and batch size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerOptConfig {
    pub learning_rate: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_period: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for InnerOptConfig {
    fn default() -> Self {
        InnerOptConfig {
            learning_rate: 0.1,
            lr_decay_factor: 0.2,
            lr_decay_period: 60,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 128,
            epochs: 200,
        }
    }
}

impl InnerOptConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return bad(format!("lr_decay_factor must be in (0, 1], got {}", self.lr_decay_factor));
        }
        if self.lr_decay_period == 0 {
            return bad("lr_decay_period must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        Ok(())
    }
}

/// Step schedule, epochs counted from 1.
pub fn lr_schedule(epoch: usize, cfg: &InnerOptConfig) -> f64 {
    let decays = epoch.saturating_sub(1) / cfg.lr_decay_period;
    cfg.learning_rate * cfg.lr_decay_factor.powi(decays as i32)
}

/// One Nesterov momentum step on a flat parameter slice:
/// `g' = g + wd * x; v = mu * v + g'; x -= lr * (g' + mu * v)`.
pub fn nesterov_update(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) {
    for ((x, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        let g = g + weight_decay * *x;
        *v = momentum * *v + g;
        *x -= lr * (g + momentum * *v);
    }
}

/// Momentum buffers matching a network's latent weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Velocity {
    pub fn zeros(net: &BinaryNetwork) -> Self {
        Velocity {
            weights: net.latent().iter().map(|l| vec![0.0; l.len()]).collect(),
            biases: net.biases().iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

/// Inner update at the scheduled learning rate for `epoch`; latent weights
/// are clipped to `[-1, 1]` afterwards.
pub fn sgd_inner_step(
    net: &mut BinaryNetwork,
    grads: &Gradients,
    velocity: &mut Velocity,
    cfg: &InnerOptConfig,
    epoch: usize,
) -> Result<()> {
    net.check_weight_shapes(&grads.weights)?;
    let lr = lr_schedule(epoch, cfg);
    let (latent, biases) = net.params_mut();
    for ((w, g), v) in latent.iter_mut().zip(&grads.weights).zip(velocity.weights.iter_mut()) {
        nesterov_update(w, g, v, lr, cfg.momentum, cfg.weight_decay);
        for x in w.iter_mut() {
            *x = x.clamp(-1.0, 1.0);
        }
    }
    for ((b, g), v) in biases.iter_mut().zip(&grads.biases).zip(velocity.biases.iter_mut()) {
        if b.len() != g.len() {
            return Err(Error::Shape("bias gradient does not match biases".into()));
        }
        nesterov_update(b, g, v, lr, cfg.momentum, cfg.weight_decay);
    }
    Ok(())
}
