//! Per-layer fault-rate optimization riding on ordinary minibatch training.
//!
//! Each minibatch of an active epoch reads the weights at a randomly
//! perturbed noise vector and records the surrogate outer loss
//! `A / A* + alpha * sqrt(E(p)) + lambda * sum(p)`. At the end of the epoch
//! the slopes of a least-squares fit of those losses against the perturbed
//! rates estimate the outer gradient, which is normalized and applied with
//! Nesterov momentum.

mod ols;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faultmem::{network_energy, EnergyModel, FaultRate, NoiseVector, MAX_FAULT_RATE};

pub use ols::ols_gradient;
pub use train::{train_fixed_noise, train_lanmax, EpochRecord, TrainOutcome, TrainReport};

/// Gradients with a norm at or below this are treated as zero.
pub const GRADIENT_NORM_FLOOR: f64 = 1e-12;

/// Default tradeoff grid for Pareto sweeps.
pub const DEFAULT_ALPHA_GRID: [f64; 7] = [0.1, 0.05, 0.03, 0.02, 0.01, 0.001, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuterConfig {
    /// Energy weight in the outer loss.
    pub alpha: f64,
    /// Noise decay coefficient.
    pub lambda: f64,
    /// Perturbation magnitude.
    pub h: f64,
    /// Last epoch (1-based) with outer updates; 0 disables them.
    pub s: usize,
    /// Outer Nesterov momentum.
    pub beta: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub p_init: f64,
}

impl Default for OuterConfig {
    fn default() -> Self {
        OuterConfig {
            alpha: 0.01,
            lambda: 5e-4,
            h: 0.01,
            s: 160,
            beta: 0.2,
            p_min: 1e-4,
            p_max: MAX_FAULT_RATE,
            p_init: 0.01,
        }
    }
}

impl OuterConfig {
    pub fn validate(&self, total_epochs: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if !self.lambda.is_finite() {
            return bad(format!("lambda must be finite, got {}", self.lambda));
        }
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return bad(format!("h must be non-negative, got {}", self.h));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("beta must be in [0, 1), got {}", self.beta));
        }
        if !(self.p_min > 0.0 && self.p_min <= MAX_FAULT_RATE) {
            return bad(format!("p_min must be in (0, 0.5], got {}", self.p_min));
        }
        if !(self.p_max >= self.p_min && self.p_max <= MAX_FAULT_RATE) {
            return bad(format!("p_max must be in [p_min, 0.5], got {}", self.p_max));
        }
        if !(self.p_init >= self.p_min && self.p_init <= self.p_max) {
            return bad(format!("p_init must be in [p_min, p_max], got {}", self.p_init));
        }
        if self.s > total_epochs {
            return bad(format!("s = {} exceeds the {} training epochs", self.s, total_epochs));
        }
        Ok(())
    }

    pub fn bounds(&self) -> (FaultRate, FaultRate) {
        (
            FaultRate::clamped(self.p_min, FaultRate::ZERO, FaultRate::new(MAX_FAULT_RATE).unwrap()),
            FaultRate::clamped(self.p_max, FaultRate::ZERO, FaultRate::new(MAX_FAULT_RATE).unwrap()),
        )
    }
}

/// One minibatch measurement: the noise vector actually applied and the
/// surrogate loss observed under it.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub perturbed_p: NoiseVector,
    pub surrogate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochLog {
    records: Vec<LossRecord>,
}

impl EpochLog {
    pub fn new() -> Self {
        EpochLog::default()
    }

    pub fn push(&mut self, record: LossRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[LossRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl FromIterator<LossRecord> for EpochLog {
    fn from_iter<I: IntoIterator<Item = LossRecord>>(iter: I) -> Self {
        EpochLog {
            records: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterState {
    pub p: NoiseVector,
    /// Lowest minibatch inner loss seen so far.
    pub best_loss: f64,
    pub velocity: Vec<f64>,
    /// Current epoch, counted from 1.
    pub epoch: usize,
}

impl OuterState {
    pub fn new(layers: usize, cfg: &OuterConfig) -> Result<Self> {
        Ok(OuterState {
            p: NoiseVector::uniform(FaultRate::new(cfg.p_init)?, layers),
            best_loss: f64::INFINITY,
            velocity: vec![0.0; layers],
            epoch: 1,
        })
    }

    /// Folds a minibatch loss into the running best.
    pub fn observe_loss(&mut self, loss: f64) {
        if loss < self.best_loss {
            self.best_loss = loss;
        }
    }
}

/// Offsets every rate by an independent draw from `{-h, 0, +h}` and clamps
/// the result into `[lo, hi]`.
pub fn perturb<R: Rng + ?Sized>(p: &NoiseVector, h: f64, rng: &mut R, lo: FaultRate, hi: FaultRate) -> NoiseVector {
    let rates = p
        .rates()
        .iter()
        .map(|r| {
            let delta = match rng.random_range(0..3u8) {
                0 => -h,
                1 => 0.0,
                _ => h,
            };
            FaultRate::clamped(r.get() + delta, lo, hi)
        })
        .collect();
    NoiseVector::new(rates)
}

/// `A / A* + alpha * sqrt(E_norm(p)) + lambda * sum(p)`.
pub fn surrogate_loss(
    a_hat: f64,
    a_star: f64,
    p: &NoiseVector,
    cfg: &OuterConfig,
    energy: &EnergyModel,
) -> Result<f64> {
    if !(a_star > 0.0) {
        return Err(Error::Numeric(format!("best minibatch loss must be positive, got {a_star}")));
    }
    let (_, e_norm) = network_energy(p, energy)?;
    Ok(a_hat / a_star + cfg.alpha * e_norm.sqrt() + cfg.lambda * p.sum())
}

/// Scales to unit Euclidean norm; near-zero vectors come back as zeros.
pub fn normalize_gradient(g: &[f64]) -> Vec<f64> {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > GRADIENT_NORM_FLOOR) {
        return vec![0.0; g.len()];
    }
    g.iter().map(|v| v / norm).collect()
}

/// Nesterov step on the noise vector followed by a clamp into the
/// configured bounds. The velocity persists in `state` across epochs.
pub fn outer_step(state: &mut OuterState, g_unit: &[f64], lr: f64, cfg: &OuterConfig) -> Result<()> {
    if g_unit.len() != state.p.len() || state.velocity.len() != state.p.len() {
        return Err(Error::Shape(format!(
            "gradient of length {} for {} layers",
            g_unit.len(),
            state.p.len()
        )));
    }
    let (lo, hi) = cfg.bounds();
    let mut values = state.p.values();
    crate::net::nesterov_update(&mut values, g_unit, &mut state.velocity, lr, cfg.beta, 0.0);
    state.p = NoiseVector::new(values.into_iter().map(|v| FaultRate::clamped(v, lo, hi)).collect());
    Ok(())
}
