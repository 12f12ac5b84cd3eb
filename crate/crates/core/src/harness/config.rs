//! Experiment configuration.
//!
//! A TOML file with one table per concern. Every key is optional; missing
//! keys take the full-scale defaults (a = 12.8, h = 0.01, s = 160,
//! lambda = 5e-4, beta = 0.2, p_init = 0.01, ...). Unknown keys and
//! out-of-range values are rejected with the offending line.
//!
//! ```toml
//! [experiment]
//! kind = "pareto"          # train | uniform-sweep | sensitivity | pareto
//! seeds = [1, 2, 3]
//! output_dir = "out/pareto"
//!
//! [dataset]
//! kind = "blobs"           # blobs | rings | idx
//! n_train = 2000
//!
//! [model]
//! hidden = [64, 64]
//! rho = 1.0
//!
//! [inner]                  # learning_rate, lr_decay_factor, lr_decay_period,
//! epochs = 20              # momentum, weight_decay, batch_size, epochs
//!
//! [outer]                  # alpha, lambda, h, s, beta, p_min, p_max, p_init
//! s = 16
//!
//! [energy]                 # a, zeta
//! [eval]                   # target_interval, confidence, min_trials, max_trials
//! [pareto]                 # alphas, uniform_baseline, uniform_rates
//! [sweep]                  # train_rates, eval_rates
//! [sensitivity]            # checkpoint, p_uniform, trials
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::McConfig;
use crate::faultmem::{DEFAULT_TECHNOLOGY_A, MAX_FAULT_RATE};
use crate::lanmax::{OuterConfig, DEFAULT_ALPHA_GRID};
use crate::net::InnerOptConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Train,
    UniformSweep,
    Sensitivity,
    Pareto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Worker threads for independent runs; 0 uses all cores.
    pub threads: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            kind: ExperimentKind::Train,
            seeds: vec![1],
            output_dir: PathBuf::from("out"),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    /// Gaussian clusters around random class centers.
    Blobs,
    /// Concentric shells, one radius per class.
    Rings,
    /// IDX image/label file pairs (MNIST layout).
    Idx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub features: usize,
    pub classes: usize,
    /// Within-class standard deviation.
    pub spread: f64,
    /// Standard deviation of the class centers (blobs only).
    pub separation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_labels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_images: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<PathBuf>,
    /// Keep only the first N IDX samples of each split (0 keeps all).
    pub limit_train: usize,
    pub limit_test: usize,
    /// Flip and pad-and-crop augmentation of image training batches.
    pub augment: bool,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            kind: DatasetKind::Blobs,
            seed: 7,
            n_train: 2000,
            n_test: 1000,
            features: 16,
            classes: 4,
            spread: 1.0,
            separation: 1.0,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            limit_train: 0,
            limit_test: 0,
            augment: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    /// Width multiplier applied to every hidden width.
    pub rho: f64,
    pub bias: bool,
    /// Output channels of an optional leading convolution (0 disables it).
    pub conv_channels: usize,
    pub conv_kernel: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden: vec![128, 128],
            rho: 1.0,
            bias: true,
            conv_channels: 0,
            conv_kernel: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    pub a: f64,
    pub zeta: u32,
}

impl Default for EnergySection {
    fn default() -> Self {
        EnergySection {
            a: DEFAULT_TECHNOLOGY_A,
            zeta: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParetoSection {
    pub alphas: Vec<f64>,
    /// Also train and evaluate uniform-noise networks for comparison.
    pub uniform_baseline: bool,
    pub uniform_rates: Vec<f64>,
}

impl Default for ParetoSection {
    fn default() -> Self {
        ParetoSection {
            alphas: DEFAULT_ALPHA_GRID.to_vec(),
            uniform_baseline: true,
            uniform_rates: vec![1e-4, 1e-3, 1e-2, 5e-2, 1e-1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub train_rates: Vec<f64>,
    pub eval_rates: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            train_rates: vec![0.0, 1e-4, 1e-3, 1e-2, 5e-2, 1e-1],
            eval_rates: vec![1e-4, 1e-3, 1e-2, 2e-2, 5e-2, 1e-1, 2e-1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub p_uniform: f64,
    pub trials: usize,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        SensitivitySection {
            checkpoint: None,
            p_uniform: 0.01,
            trials: 30,
        }
    }
}

/// Settings of the `train` experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Train at this fixed uniform rate instead of optimizing the noise
    /// vector (used to produce checkpoints for the sensitivity analysis).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniform_p: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub train: TrainSection,
    pub dataset: DatasetSpec,
    pub model: ModelSection,
    pub inner: InnerOptConfig,
    pub outer: OuterConfig,
    pub energy: EnergySection,
    pub eval: McConfig,
    pub pareto: ParetoSection,
    pub sweep: SweepSection,
    pub sensitivity: SensitivitySection,
}

/// A validation failure pinned to a `[section] key`.
struct Invalid {
    section: &'static str,
    key: &'static str,
    message: String,
}

fn invalid(section: &'static str, key: &'static str, message: impl Into<String>) -> Invalid {
    Invalid {
        section,
        key,
        message: message.into(),
    }
}

fn check_rates(section: &'static str, key: &'static str, rates: &[f64]) -> Result<(), Invalid> {
    if rates.is_empty() {
        return Err(invalid(section, key, "must not be empty"));
    }
    if let Some(r) = rates.iter().find(|r| !(0.0..=MAX_FAULT_RATE).contains(*r)) {
        return Err(invalid(section, key, format!("fault rate {r} outside [0, 0.5]")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text; `origin` names the source in error messages and
    /// relative data paths resolve against `base_dir`.
    pub fn from_toml(text: &str, origin: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Validation {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.resolve_paths(base_dir);
        if let Err(bad) = cfg.check() {
            let location = match find_key_line(text, bad.section, bad.key) {
                Some(line) => format!("{origin}:{line}"),
                None => origin.to_string(),
            };
            return Err(Error::Validation {
                path: location,
                message: format!("[{}] {}: {}", bad.section, bad.key, bad.message),
            });
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Re-runs validation after programmatic edits (CLI overrides).
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|bad| Error::Validation {
            path: "config".into(),
            message: format!("[{}] {}: {}", bad.section, bad.key, bad.message),
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.dataset.train_images);
        fix(&mut self.dataset.train_labels);
        fix(&mut self.dataset.test_images);
        fix(&mut self.dataset.test_labels);
        fix(&mut self.sensitivity.checkpoint);
    }

    fn check(&self) -> Result<(), Invalid> {
        let e = &self.experiment;
        if e.seeds.is_empty() {
            return Err(invalid("experiment", "seeds", "must list at least one seed"));
        }

        let d = &self.dataset;
        match d.kind {
            DatasetKind::Blobs | DatasetKind::Rings => {
                if d.n_train == 0 {
                    return Err(invalid("dataset", "n_train", "must be at least 1"));
                }
                if d.n_test == 0 {
                    return Err(invalid("dataset", "n_test", "must be at least 1"));
                }
                if d.features == 0 {
                    return Err(invalid("dataset", "features", "must be at least 1"));
                }
                if d.kind == DatasetKind::Rings && d.features < 2 {
                    return Err(invalid("dataset", "features", "rings need at least 2 features"));
                }
                if d.classes < 2 {
                    return Err(invalid("dataset", "classes", "need at least 2 classes"));
                }
                if !(d.spread > 0.0 && d.spread.is_finite()) {
                    return Err(invalid("dataset", "spread", "must be positive"));
                }
                if !(d.separation > 0.0 && d.separation.is_finite()) {
                    return Err(invalid("dataset", "separation", "must be positive"));
                }
            }
            DatasetKind::Idx => {
                for (key, path) in [
                    ("train_images", &d.train_images),
                    ("train_labels", &d.train_labels),
                    ("test_images", &d.test_images),
                    ("test_labels", &d.test_labels),
                ] {
                    match path {
                        None => return Err(invalid("dataset", key, "required for kind = \"idx\"")),
                        Some(p) if !p.is_file() => {
                            return Err(invalid("dataset", key, format!("file not found: {}", p.display())))
                        }
                        Some(_) => {}
                    }
                }
            }
        }

        let m = &self.model;
        if !(m.rho > 0.0 && m.rho.is_finite()) {
            return Err(invalid("model", "rho", "must be positive"));
        }
        if m.hidden.contains(&0) {
            return Err(invalid("model", "hidden", "widths must be at least 1"));
        }
        if m.conv_channels > 0 && m.conv_kernel % 2 == 0 {
            return Err(invalid("model", "conv_kernel", "must be odd"));
        }

        self.inner
            .validate()
            .map_err(|err| invalid("inner", inner_key(&err.to_string()), err.to_string()))?;
        self.outer
            .validate(self.inner.epochs)
            .map_err(|err| invalid("outer", outer_key(&err.to_string()), err.to_string()))?;

        if !(self.energy.a > 0.0 && self.energy.a.is_finite()) {
            return Err(invalid("energy", "a", "must be positive"));
        }
        if self.energy.zeta == 0 {
            return Err(invalid("energy", "zeta", "must be at least 1"));
        }
        self.eval
            .validate()
            .map_err(|err| invalid("eval", eval_key(&err.to_string()), err.to_string()))?;

        let p = &self.pareto;
        if p.alphas.is_empty() {
            return Err(invalid("pareto", "alphas", "must not be empty"));
        }
        if let Some(a) = p.alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(invalid("pareto", "alphas", format!("alpha must be >= 0, got {a}")));
        }
        if p.uniform_baseline {
            check_rates("pareto", "uniform_rates", &p.uniform_rates)?;
        }
        check_rates("sweep", "train_rates", &self.sweep.train_rates)?;
        check_rates("sweep", "eval_rates", &self.sweep.eval_rates)?;

        if let Some(p) = self.train.uniform_p {
            if !(0.0..=MAX_FAULT_RATE).contains(&p) {
                return Err(invalid("train", "uniform_p", "must be in [0, 0.5]"));
            }
        }

        let s = &self.sensitivity;
        if !(0.0..=MAX_FAULT_RATE).contains(&s.p_uniform) {
            return Err(invalid("sensitivity", "p_uniform", "must be in [0, 0.5]"));
        }
        if s.trials < 10 {
            return Err(invalid("sensitivity", "trials", "must be at least 10"));
        }
        if e.kind == ExperimentKind::Sensitivity {
            if let Some(path) = &s.checkpoint {
                if !path.is_file() {
                    return Err(invalid(
                        "sensitivity",
                        "checkpoint",
                        format!("file not found: {}", path.display()),
                    ));
                }
            }
        }
        Ok(())
    }
}

// Module validators phrase their messages as "<key> must ..." or
// "need <constraint on key> ...".
fn key_of(msg: &str, keys: &[&'static str], fallback: &'static str) -> &'static str {
    let msg = msg.strip_prefix("configuration error: ").unwrap_or(msg);
    let words: Vec<&str> = msg
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .collect();
    if let Some(k) = keys.iter().find(|k| Some(**k) == words.first().copied()) {
        return k;
    }
    keys.iter().copied().find(|k| words.contains(k)).unwrap_or(fallback)
}

fn inner_key(msg: &str) -> &'static str {
    key_of(
        msg,
        &["learning_rate", "lr_decay_factor", "lr_decay_period", "momentum", "weight_decay", "batch_size", "epochs"],
        "inner",
    )
}

fn outer_key(msg: &str) -> &'static str {
    key_of(msg, &["p_min", "p_max", "p_init", "alpha", "lambda", "h", "beta", "s"], "outer")
}

fn eval_key(msg: &str) -> &'static str {
    key_of(msg, &["target_interval", "confidence", "min_trials", "max_trials"], "eval")
}

/// 1-based line of `key = ...` inside `[section]`, if present.
fn find_key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Validation {
        path: path.display().to_string(),
        message: format!("cannot read config: {e}"),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    ExperimentConfig::from_toml(&text, &path.display().to_string(), base)
}
