//! Experiment drivers. Independent runs go to a worker pool; results are
//! gathered in job order and written by the calling thread, so outputs do
//! not depend on scheduling.
//!
//! Every run draws from ChaCha8 streams derived from its seed: one stream for
//! initialization, one for training and one for evaluation. Runs that share
//! a seed therefore start from the same weights and data order.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::csvio::{self, f64_cell};
use super::dataset::load_dataset;
use super::plot;
use crate::data::Split;
use crate::error::{Error, Result};
use crate::eval::{layer_sensitivity, mc_accuracy, uniform_noise_sweep, AccuracyEstimate, BoxStats};
use crate::faultmem::{network_energy, EnergyModel, FaultRate, NoiseVector};
use crate::lanmax::{train_fixed_noise, train_lanmax, OuterConfig, TrainOutcome};

use crate::net::{Architecture, BinaryNetwork, Checkpoint};

pub const STREAM_INIT: u64 = 0;
pub const STREAM_TRAIN: u64 = 1;
pub const STREAM_EVAL: u64 = 2;
pub const STREAM_SENSITIVITY: u64 = 3;

/// Generator for `purpose` (one of the stream constants) and a sub-index.
pub fn stream_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 32) | index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub alpha: f64,
    pub seed: u64,
    pub noise: NoiseVector,
    /// Normalized energy.
    pub energy: f64,
    pub acc_mean: f64,
    pub acc_halfwidth: f64,
    pub trials: usize,
}

/// A uniform-noise reference point of the Pareto comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformPoint {
    pub p: f64,
    pub seed: u64,
    pub energy: f64,
    pub acc_mean: f64,
    pub acc_halfwidth: f64,
    pub trials: usize,
}

/// Seed-averaged sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub p_t: f64,
    pub p_eval: f64,
    pub acc_mean: f64,
    pub acc_halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub seed: u64,
    pub p_t: f64,
    pub p_eval: f64,
    pub acc_mean: f64,
    pub acc_halfwidth: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub layer: usize,
    pub stats: BoxStats,
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub run: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub seed: u64,
    pub noise: NoiseVector,
    pub energy: f64,
    pub estimate: AccuracyEstimate,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub runs: Vec<TrainRun>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone)]
pub struct ParetoSummary {
    pub points: Vec<ParetoPoint>,
    pub uniform: Vec<UniformPoint>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub cells: Vec<SweepCell>,
    pub runs: Vec<SweepRun>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone)]
pub struct SensitivitySummary {
    pub rows: Vec<SensitivityRow>,
    pub samples: Vec<(usize, Vec<f64>)>,
    pub baseline: AccuracyEstimate,
}

/// Data, architecture and energy model shared by all runs of an experiment.
struct Setup {
    split: Split,
    arch: Architecture,
    energy: EnergyModel,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let split = load_dataset(&cfg.dataset)?;
        let m = &cfg.model;
        let arch = Architecture {
            input: split.train.shape,
            classes: split.train.classes,
            hidden: m.hidden.clone(),
            rho: m.rho,
            bias: m.bias,
            conv_channels: m.conv_channels,
            conv_kernel: m.conv_kernel,
        };
        let sizes = arch.layers()?.iter().map(|l| l.weight_count()).collect();
        let energy = EnergyModel::new(cfg.energy.a, cfg.energy.zeta, sizes)?;
        Ok(Setup { split, arch, energy })
    }

    fn layers(&self) -> usize {
        self.energy.layer_sizes.len()
    }

    fn fresh_net(&self, seed: u64) -> Result<BinaryNetwork> {
        BinaryNetwork::from_architecture(&self.arch, &mut stream_rng(seed, STREAM_INIT, 0))
    }

    fn train_uniform(&self, cfg: &ExperimentConfig, seed: u64, p: f64) -> Result<TrainOutcome> {
        let noise = NoiseVector::uniform(FaultRate::new(p)?, self.layers());
        train_fixed_noise(
            &self.split.train,
            self.fresh_net(seed)?,
            &cfg.inner,
            &noise,
            &self.energy,
            &mut stream_rng(seed, STREAM_TRAIN, 0),
        )
    }

    fn train_lanmax(&self, cfg: &ExperimentConfig, outer: &OuterConfig, seed: u64) -> Result<TrainOutcome> {
        train_lanmax(
            &self.split.train,
            self.fresh_net(seed)?,
            &cfg.inner,
            outer,
            &self.energy,
            &mut stream_rng(seed, STREAM_TRAIN, 0),
        )
    }

    fn evaluate(&self, cfg: &ExperimentConfig, net: &BinaryNetwork, noise: &NoiseVector, seed: u64) -> Result<AccuracyEstimate> {
        mc_accuracy(net, noise, &self.split.test, &cfg.eval, &mut stream_rng(seed, STREAM_EVAL, 0))
    }

    fn energy_of(&self, noise: &NoiseVector) -> Result<f64> {
        Ok(network_energy(noise, &self.energy)?.1)
    }
}

/// Runs every job on a pool of `threads` workers (0 = all cores). Results
/// come back in job order; a failed job does not stop the others.
fn run_jobs<J, T, F>(threads: usize, jobs: &[J], f: F) -> Result<Vec<Result<T>>>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(&f).collect()))
}

fn prepare_output(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let out = cfg.experiment.output_dir.clone();
    fs::create_dir_all(&out)?;
    csvio::write_atomic(&out.join("config.toml"), cfg.to_toml()?.as_bytes())?;
    Ok(out)
}

fn report_failures(failures: &[Failure]) {
    for f in failures {
        warn!("run {} (seed {}) failed: {}", f.run, f.seed, f.error);
    }
}

/// Trains one network per seed (LaNMax, or fixed uniform noise when
/// `[train] uniform_p` is set), then checkpoints and evaluates it.
pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainSummary> {
    let setup = Setup::new(cfg)?;
    let out = prepare_output(cfg)?;
    let layers = setup.layers();
    let seeds = cfg.experiment.seeds.clone();

    let results = run_jobs(cfg.experiment.threads, &seeds, |&seed| {
        info!("train: seed {seed}");
        let outcome = match cfg.train.uniform_p {
            Some(p) => setup.train_uniform(cfg, seed, p)?,
            None => setup.train_lanmax(cfg, &cfg.outer, seed)?,
        };
        let est = setup.evaluate(cfg, &outcome.network, &outcome.noise, seed)?;
        Ok((outcome, est))
    })?;

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut eval_rows = Vec::new();
    for (&seed, res) in seeds.iter().zip(results) {
        match res {
            Ok((outcome, estimate)) => {
                csvio::write_epoch_log(&out.join(format!("epochs_seed{seed}.csv")), &outcome.report, layers)?;
                let path = out.join(format!("checkpoint_seed{seed}.json"));
                Checkpoint::new(outcome.network, outcome.noise.clone(), seed, cfg.inner.epochs)?.save(&path)?;
                let energy = setup.energy_of(&outcome.noise)?;
                eval_rows.push(eval_row(seed, &outcome.noise, energy, &estimate));
                runs.push(TrainRun {
                    seed,
                    noise: outcome.noise,
                    energy,
                    estimate,
                    checkpoint: path,
                });
            }
            Err(e) => failures.push(Failure {
                run: "train".into(),
                seed,
                error: e.to_string(),
            }),
        }
    }
    report_failures(&failures);
    csvio::write_table(&out.join("train.csv"), &csvio::eval_header(layers), eval_rows)?;
    csvio::write_failures(&out.join("failures.csv"), &failures)?;
    csvio::write_manifest(
        &out,
        "train",
        &[
            ("train.csv", "final noise vector, energy and accuracy per seed"),
            ("epochs_seed<N>.csv", "per-epoch training log"),
            ("checkpoint_seed<N>.json", "trained network and noise vector"),
            ("failures.csv", "runs that failed"),
        ],
    )?;
    Ok(TrainSummary { runs, failures })
}

fn eval_row(seed: u64, noise: &NoiseVector, energy: f64, est: &AccuracyEstimate) -> Vec<String> {
    let mut r = vec![seed.to_string()];
    r.extend(noise.values().into_iter().map(f64_cell));
    r.extend([
        f64_cell(energy),
        f64_cell(est.mean),
        f64_cell(est.ci_halfwidth),
        est.trials.to_string(),
        u8::from(est.converged).to_string(),
    ]);
    r
}

enum ParetoJob {
    Alpha(f64),
    Uniform(f64),
}

enum ParetoResult {
    Point(ParetoPoint, TrainOutcome),
    Uniform(UniformPoint),
}

/// LaNMax over the alpha grid for every seed, plus the uniform-noise
/// baseline grid when enabled.
pub fn run_pareto(cfg: &ExperimentConfig) -> Result<ParetoSummary> {
    let setup = Setup::new(cfg)?;
    let out = prepare_output(cfg)?;
    let layers = setup.layers();

    let mut jobs: Vec<(ParetoJob, u64)> = Vec::new();
    for &alpha in &cfg.pareto.alphas {
        for &seed in &cfg.experiment.seeds {
            jobs.push((ParetoJob::Alpha(alpha), seed));
        }
    }
    if cfg.pareto.uniform_baseline {
        for &p in &cfg.pareto.uniform_rates {
            for &seed in &cfg.experiment.seeds {
                jobs.push((ParetoJob::Uniform(p), seed));
            }
        }
    }

    let results = run_jobs(cfg.experiment.threads, &jobs, |(job, seed)| {
                let seed = *seed;
                match *job {
                    ParetoJob::Alpha(alpha) => {
                        info!("pareto: alpha {alpha}, seed {seed}");
                        let outer = OuterConfig { alpha, ..cfg.outer.clone() };
                        let outcome = setup.train_lanmax(cfg, &outer, seed)?;
                        let est = setup.evaluate(cfg, &outcome.network, &outcome.noise, seed)?;
                        let point = ParetoPoint {
                            alpha,
                            seed,
                            noise: outcome.noise.clone(),
                            energy: setup.energy_of(&outcome.noise)?,
                            acc_mean: est.mean,
                            acc_halfwidth: est.ci_halfwidth,
                            trials: est.trials,
                        };
                        Ok(ParetoResult::Point(point, outcome))
                    }
                    ParetoJob::Uniform(p) => {
                        info!("pareto: uniform p {p}, seed {seed}");
                        let outcome = setup.train_uniform(cfg, seed, p)?;
                        let est = setup.evaluate(cfg, &outcome.network, &outcome.noise, seed)?;
                        Ok(ParetoResult::Uniform(UniformPoint {
                            p,
                            seed,
                            energy: setup.energy_of(&outcome.noise)?,
                            acc_mean: est.mean,
                            acc_halfwidth: est.ci_halfwidth,
                            trials: est.trials,
                        }))
                    }
                }
    })?;

    let logs = out.join("logs");
    let mut points = Vec::new();
    let mut uniform = Vec::new();
    let mut failures = Vec::new();
    for ((job, seed), res) in jobs.iter().zip(results) {
        match res {
            Ok(ParetoResult::Point(point, outcome)) => {
                let name = format!("alpha{}_seed{}.csv", point.alpha, point.seed);
                csvio::write_epoch_log(&logs.join(name), &outcome.report, layers)?;
                points.push(point);
            }
            Ok(ParetoResult::Uniform(u)) => uniform.push(u),
            Err(e) => failures.push(Failure {
                run: match job {
                    ParetoJob::Alpha(a) => format!("alpha={a}"),
                    ParetoJob::Uniform(p) => format!("uniform={p}"),
                },
                seed: *seed,
                error: e.to_string(),
            }),
        }
    }
    report_failures(&failures);
    csvio::write_pareto(&out.join("pareto.csv"), &points, layers)?;
    csvio::write_uniform(&out.join("pareto_uniform.csv"), &uniform)?;
    csvio::write_failures(&out.join("failures.csv"), &failures)?;
    plot::pareto_plot(&out.join("pareto.svg"), &points, &uniform)?;
    csvio::write_manifest(
        &out,
        "pareto",
        &[
            ("pareto.csv", "one row per (alpha, seed) LaNMax run"),
            ("pareto_uniform.csv", "uniform-noise baseline per (p, seed)"),
            ("logs/alpha<A>_seed<N>.csv", "per-epoch training log"),
            ("failures.csv", "runs that failed"),
            ("pareto.svg", "accuracy vs normalized energy"),
        ],
    )?;
    Ok(ParetoSummary {
        points,
        uniform,
        failures,
    })
}

/// Networks trained at each uniform rate, evaluated at each uniform rate.
pub fn run_uniform_sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    let setup = Setup::new(cfg)?;
    let out = prepare_output(cfg)?;
    let train_rates = &cfg.sweep.train_rates;
    let eval_rates = &cfg.sweep.eval_rates;

    let jobs: Vec<(usize, u64)> = (0..train_rates.len())
        .flat_map(|i| cfg.experiment.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results = run_jobs(cfg.experiment.threads, &jobs, |&(i, seed)| {
                let p_t = train_rates[i];
                info!("uniform sweep: p_t {p_t}, seed {seed}");
                let mut rows = uniform_noise_sweep(
                    &[p_t],
                    eval_rates,
                    |rate| Ok(setup.train_uniform(cfg, seed, rate.get())?.network),
                    &setup.split.test,
                    &cfg.eval,
                    &mut stream_rng(seed, STREAM_EVAL, i as u64),
                )?;
                Ok(rows.remove(0))
    })?;

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (&(i, seed), res) in jobs.iter().zip(results) {
        match res {
            Ok(row) => {
                for (est, &p_eval) in row.iter().zip(eval_rates) {
                    runs.push(SweepRun {
                        seed,
                        p_t: train_rates[i],
                        p_eval,
                        acc_mean: est.mean,
                        acc_halfwidth: est.ci_halfwidth,
                        trials: est.trials,
                    });
                }
            }
            Err(e) => failures.push(Failure {
                run: format!("p_t={}", train_rates[i]),
                seed,
                error: e.to_string(),
            }),
        }
    }
    report_failures(&failures);

    let cells = aggregate_sweep(&runs, train_rates, eval_rates);
    csvio::write_sweep(&out.join("sweep.csv"), &cells)?;
    csvio::write_sweep_runs(&out.join("sweep_runs.csv"), &runs)?;
    csvio::write_failures(&out.join("failures.csv"), &failures)?;
    plot::sweep_plot(&out.join("sweep.svg"), &cells)?;
    csvio::write_manifest(
        &out,
        "uniform-sweep",
        &[
            ("sweep.csv", "seed-averaged accuracy per (p_t, p_eval)"),
            ("sweep_runs.csv", "per-seed accuracy per (p_t, p_eval)"),
            ("failures.csv", "runs that failed"),
            ("sweep.svg", "accuracy vs evaluation fault rate"),
        ],
    )?;
    Ok(SweepSummary { cells, runs, failures })
}

/// Averages over seeds. The half-width is that of the mean of independent
/// estimates: `sqrt(sum hw^2) / n`.
pub fn aggregate_sweep(runs: &[SweepRun], train_rates: &[f64], eval_rates: &[f64]) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for &p_t in train_rates {
        for &p_eval in eval_rates {
            let sel: Vec<&SweepRun> = runs.iter().filter(|r| r.p_t == p_t && r.p_eval == p_eval).collect();
            if sel.is_empty() {
                continue;
            }
            let n = sel.len() as f64;
            cells.push(SweepCell {
                p_t,
                p_eval,
                acc_mean: sel.iter().map(|r| r.acc_mean).sum::<f64>() / n,
                acc_halfwidth: sel.iter().map(|r| r.acc_halfwidth.powi(2)).sum::<f64>().sqrt() / n,
            });
        }
    }
    cells
}

fn load_checkpoint(path: Option<&Path>, setup: &Setup) -> Result<Checkpoint> {
    let path = path.ok_or_else(|| Error::Config("a checkpoint is required ([sensitivity] checkpoint or --checkpoint)".into()))?;
    if !path.is_file() {
        return Err(Error::Config(format!("checkpoint not found: {}", path.display())));
    }
    let ck = Checkpoint::load(path)?;
    if ck.network.input_dim() != setup.split.test.dim() {
        return Err(Error::Shape(format!(
            "checkpoint expects {} features, dataset has {}",
            ck.network.input_dim(),
            setup.split.test.dim()
        )));
    }
    Ok(ck)
}

/// Per-layer randomization study of a trained checkpoint, using the first
/// configured seed.
pub fn run_sensitivity(cfg: &ExperimentConfig) -> Result<SensitivitySummary> {
    let setup = Setup::new(cfg)?;
    let ck = load_checkpoint(cfg.sensitivity.checkpoint.as_deref(), &setup)?;
    let out = prepare_output(cfg)?;
    let seed = cfg.experiment.seeds[0];
    if cfg.experiment.seeds.len() > 1 {
        warn!("sensitivity uses only the first seed ({seed})");
    }
    let net = &ck.network;
    let p = FaultRate::new(cfg.sensitivity.p_uniform)?;
    let test = &setup.split.test;
    let baseline = mc_accuracy(
        net,
        &NoiseVector::uniform(p, net.num_layers()),
        test,
        &cfg.eval,
        &mut stream_rng(seed, STREAM_SENSITIVITY, 0),
    )?;

    let layers: Vec<usize> = (1..=net.num_layers()).collect();
    let results = run_jobs(cfg.experiment.threads, &layers, |&l| {
                info!("sensitivity: layer {l}");
                layer_sensitivity(
                    net,
                    p,
                    l,
                    cfg.sensitivity.trials,
                    test,
                    &baseline,
                    &mut stream_rng(seed, STREAM_SENSITIVITY, l as u64),
                )
    })?;
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for res in results {
        let r = res?;
        let stats = BoxStats::from_samples(&r.samples)
            .ok_or_else(|| Error::Numeric(format!("layer {}: no usable samples", r.layer)))?;
        rows.push(SensitivityRow {
            layer: r.layer,
            stats,
            baseline: r.baseline,
        });
        samples.push((r.layer, r.samples));
    }

    csvio::write_sensitivity(&out.join("sensitivity.csv"), &rows)?;
    csvio::write_sensitivity_samples(&out.join("sensitivity_samples.csv"), &samples)?;
    plot::sensitivity_plot(&out.join("sensitivity.svg"), &rows)?;
    csvio::write_manifest(
        &out,
        "sensitivity",
        &[
            ("sensitivity.csv", "box statistics per randomized layer"),
            ("sensitivity_samples.csv", "raw accuracy per (layer, trial)"),
            ("sensitivity.svg", "box plot with unrandomized baseline"),
        ],
    )?;
    Ok(SensitivitySummary {
        rows,
        samples,
        baseline,
    })
}

/// Monte-Carlo accuracy of a checkpoint at its stored noise vector, or at a
/// uniform override rate.
pub fn run_eval(cfg: &ExperimentConfig, checkpoint: &Path, uniform_p: Option<f64>) -> Result<AccuracyEstimate> {
    let setup = Setup::new(cfg)?;
    let ck = load_checkpoint(Some(checkpoint), &setup)?;
    let out = prepare_output(cfg)?;
    let seed = cfg.experiment.seeds[0];
    let noise = match uniform_p {
        Some(p) => NoiseVector::uniform(FaultRate::new(p)?, ck.network.num_layers()),
        None => ck.noise.clone(),
    };
    let model = EnergyModel::new(cfg.energy.a, cfg.energy.zeta, ck.network.weight_counts())?;
    let energy = network_energy(&noise, &model)?.1;
    let est = mc_accuracy(&ck.network, &noise, &setup.split.test, &cfg.eval, &mut stream_rng(seed, STREAM_EVAL, 0))?;
    csvio::write_table(
        &out.join("eval.csv"),
        &csvio::eval_header(noise.len()),
        [eval_row(seed, &noise, energy, &est)],
    )?;
    Ok(est)
}
