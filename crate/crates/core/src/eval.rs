//! Accuracy of networks whose weights are read from faulty memory.
//!
//! With any nonzero fault rate the network is a random function, so accuracy
//! is a Monte-Carlo average over full test-set passes, each with freshly
//! corrupted weights. Trials continue until the normal-approximation
//! confidence interval on the mean is narrow enough.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::faultmem::{corrupt_weights, FaultRate, NoiseVector};
use crate::net::{accuracy_percent, forward, BinaryNetwork, LayerWeights};

const SCORE_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    /// Full confidence-interval width to stop at, in percentage points.
    pub target_interval: f64,
    pub confidence: f64,
    pub min_trials: usize,
    pub max_trials: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            target_interval: 5.0,
            confidence: 0.95,
            min_trials: 5,
            max_trials: 500,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_interval > 0.0 && self.target_interval.is_finite()) {
            return Err(Error::Config(format!(
                "target_interval must be positive, got {}",
                self.target_interval
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config(format!("confidence must be in (0, 1), got {}", self.confidence)));
        }
        if self.min_trials < 2 || self.max_trials < self.min_trials {
            return Err(Error::Config(format!(
                "need 2 <= min_trials <= max_trials, got {} and {}",
                self.min_trials, self.max_trials
            )));
        }
        Ok(())
    }

    /// Two-sided normal quantile for the configured confidence level.
    pub fn z(&self) -> f64 {
        Normal::standard().inverse_cdf(0.5 + self.confidence / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEstimate {
    /// Percent.
    pub mean: f64,
    /// Percentage points.
    pub ci_halfwidth: f64,
    pub confidence: f64,
    pub trials: usize,
    pub converged: bool,
}

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
struct Running {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// Repeats `trial` until the interval is narrow enough or `max_trials` runs
/// out. This is the stopping rule behind [`mc_accuracy`].
pub fn mc_estimate<R, F>(mut trial: F, cfg: &McConfig, rng: &mut R) -> Result<AccuracyEstimate>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<f64>,
{
    cfg.validate()?;
    let z = cfg.z();
    let mut stats = Running::default();
    loop {
        stats.push(trial(rng)?);
        if stats.n < cfg.min_trials {
            continue;
        }
        let half = z * (stats.sample_variance() / stats.n as f64).sqrt();
        let converged = 2.0 * half <= cfg.target_interval;
        if converged || stats.n >= cfg.max_trials {
            return Ok(AccuracyEstimate {
                mean: stats.mean,
                ci_halfwidth: half,
                confidence: cfg.confidence,
                trials: stats.n,
                converged,
            });
        }
    }
}

/// Test accuracy (percent) of one concrete set of read-back weights.
pub fn score(net: &BinaryNetwork, weights: &[Vec<f64>], test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Config("test set is empty".into()));
    }
    let mut correct = 0.0;
    for (x, y) in test.chunks(SCORE_CHUNK) {
        let logits = forward(net, weights, x)?;
        correct += accuracy_percent(&logits, y) * y.len() as f64 / 100.0;
    }
    Ok(100.0 * correct / test.len() as f64)
}

/// Monte-Carlo test accuracy at noise vector `p`. A fully reliable `p`
/// needs a single deterministic pass (half-width 0, one trial).
pub fn mc_accuracy<R: Rng + ?Sized>(
    net: &BinaryNetwork,
    p: &NoiseVector,
    test: &Dataset,
    cfg: &McConfig,
    rng: &mut R,
) -> Result<AccuracyEstimate> {
    cfg.validate()?;
    let binary = net.binary_weights();
    if p.len() != binary.len() {
        return Err(Error::Config(format!(
            "noise vector has {} rates for {} layers",
            p.len(),
            binary.len()
        )));
    }
    if p.is_reliable() {
        return Ok(AccuracyEstimate {
            mean: score(net, &binary, test)?,
            ci_halfwidth: 0.0,
            confidence: cfg.confidence,
            trials: 1,
            converged: true,
        });
    }
    mc_estimate(
        |rng| {
            let read = corrupt_weights(&binary, p, rng)?;
            score(net, &read, test)
        },
        cfg,
        rng,
    )
}

/// `matrix[i][j]`: accuracy of the network trained at uniform rate
/// `train_rates[i]`, evaluated at uniform rate `eval_rates[j]`.
pub fn uniform_noise_sweep<R, F>(
    train_rates: &[f64],
    eval_rates: &[f64],
    mut trainer: F,
    test: &Dataset,
    cfg: &McConfig,
    rng: &mut R,
) -> Result<Vec<Vec<AccuracyEstimate>>>
where
    R: Rng + ?Sized,
    F: FnMut(FaultRate) -> Result<BinaryNetwork>,
{
    if train_rates.is_empty() || eval_rates.is_empty() {
        return Err(Error::Config("sweep needs at least one train and one eval rate".into()));
    }
    let eval_rates = eval_rates
        .iter()
        .map(|&p| FaultRate::new(p))
        .collect::<Result<Vec<_>>>()?;
    let mut matrix = Vec::with_capacity(train_rates.len());
    for &pt in train_rates {
        let net = trainer(FaultRate::new(pt)?)?;
        let row = eval_rates
            .iter()
            .map(|&pe| mc_accuracy(&net, &NoiseVector::uniform(pe, net.num_layers()), test, cfg, rng))
            .collect::<Result<Vec<_>>>()?;
        matrix.push(row);
    }
    Ok(matrix)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    /// 1-based layer index.
    pub layer: usize,
    pub samples: Vec<f64>,
    pub baseline: f64,
}

/// One test pass with every layer read at `p_uniform`, except `randomize`
/// (1-based) whose weights are replaced by fresh uniform random signs.
pub fn randomized_trial<R: Rng + ?Sized>(
    net: &BinaryNetwork,
    p_uniform: FaultRate,
    randomize: Option<usize>,
    test: &Dataset,
    rng: &mut R,
) -> Result<f64> {
    let layers = net.num_layers();
    if let Some(l) = randomize {
        if l == 0 || l > layers {
            return Err(Error::Index(format!("layer {l} outside 1..={layers}")));
        }
    }
    let mut read: LayerWeights = corrupt_weights(&net.binary_weights(), &NoiseVector::uniform(p_uniform, layers), rng)?;
    if let Some(l) = randomize {
        for w in read[l - 1].iter_mut() {
            *w = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
    }
    score(net, &read, test)
}

/// Accuracy distribution when layer `layer` (1-based) is replaced by random
/// signs, against an already-measured unrandomized baseline.
pub fn layer_sensitivity<R: Rng + ?Sized>(
    net: &BinaryNetwork,
    p_uniform: FaultRate,
    layer: usize,
    trials: usize,
    test: &Dataset,
    baseline: &AccuracyEstimate,
    rng: &mut R,
) -> Result<SensitivityResult> {
    if layer == 0 || layer > net.num_layers() {
        return Err(Error::Index(format!("layer {layer} outside 1..={}", net.num_layers())));
    }
    if trials < 10 {
        return Err(Error::Config(format!("sensitivity needs at least 10 trials, got {trials}")));
    }
    let samples = (0..trials)
        .map(|_| randomized_trial(net, p_uniform, Some(layer), test, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityResult {
        layer,
        samples,
        baseline: baseline.mean,
    })
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxStats {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() || samples.iter().any(|v| v.is_nan()) {
            return None;
        }
        let mut s = samples.to_vec();
        s.sort_by(|a, b| a.total_cmp(b));
        let q = |f: f64| {
            let pos = f * (s.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
        };
        Some(BoxStats {
            min: s[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: s[s.len() - 1],
        })
    }
}
