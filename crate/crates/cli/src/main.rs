use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lanmax_core::harness::{self, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "lanmax", version, about = "Binary networks on unreliable memory: training, sweeps and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one network per seed and write checkpoints.
    Train(Common),
    /// Sweep the alpha grid (plus the uniform-noise baseline).
    Pareto(Common),
    /// Train at uniform rates and evaluate at uniform rates.
    UniformSweep(Common),
    /// Randomize one layer at a time of a trained checkpoint.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Monte-Carlo accuracy of a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluate at this uniform rate instead of the stored noise vector.
        #[arg(long)]
        p: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => harness::load_config(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.experiment.kind = kind;
        if let Some(seed) = self.seed {
            cfg.experiment.seeds = vec![seed];
        }
        if let Some(out) = &self.out {
            cfg.experiment.output_dir = out.clone();
        }
        if let Some(t) = self.threads {
            cfg.experiment.threads = t;
        }
        Ok(cfg)
    }
}

fn exit_for(failed: usize, total: usize) -> ExitCode {
    if failed > 0 {
        eprintln!("{failed} of {total} runs failed, see failures.csv");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train(common) => {
            let cfg = common.load(ExperimentKind::Train)?;
            let s = harness::run_train(&cfg).context("train failed")?;
            for r in &s.runs {
                println!(
                    "seed {}: accuracy {:.2} ± {:.2} %, E_norm {:.4}, p = {:?}",
                    r.seed,
                    r.estimate.mean,
                    r.estimate.ci_halfwidth,
                    r.energy,
                    r.noise.values()
                );
            }
            Ok(exit_for(s.failures.len(), s.runs.len() + s.failures.len()))
        }
        Command::Pareto(common) => {
            let cfg = common.load(ExperimentKind::Pareto)?;
            let s = harness::run_pareto(&cfg).context("pareto sweep failed")?;
            for p in &s.points {
                println!(
                    "alpha {} seed {}: accuracy {:.2} ± {:.2} %, E_norm {:.4}",
                    p.alpha, p.seed, p.acc_mean, p.acc_halfwidth, p.energy
                );
            }
            for u in &s.uniform {
                println!(
                    "uniform p {} seed {}: accuracy {:.2} ± {:.2} %, E_norm {:.4}",
                    u.p, u.seed, u.acc_mean, u.acc_halfwidth, u.energy
                );
            }
            let total = s.points.len() + s.uniform.len() + s.failures.len();
            Ok(exit_for(s.failures.len(), total))
        }
        Command::UniformSweep(common) => {
            let cfg = common.load(ExperimentKind::UniformSweep)?;
            let s = harness::run_uniform_sweep(&cfg).context("uniform sweep failed")?;
            for c in &s.cells {
                println!(
                    "p_t {} p_eval {}: accuracy {:.2} ± {:.2} %",
                    c.p_t, c.p_eval, c.acc_mean, c.acc_halfwidth
                );
            }
            let jobs = cfg.sweep.train_rates.len() * cfg.experiment.seeds.len();
            Ok(exit_for(s.failures.len(), jobs))
        }
        Command::Sensitivity { common, checkpoint } => {
            let mut cfg = common.load(ExperimentKind::Sensitivity)?;
            if checkpoint.is_some() {
                cfg.sensitivity.checkpoint = checkpoint;
            }
            let s = harness::run_sensitivity(&cfg).context("sensitivity analysis failed")?;
            println!(
                "baseline: {:.2} ± {:.2} %",
                s.baseline.mean, s.baseline.ci_halfwidth
            );
            for r in &s.rows {
                println!(
                    "layer {}: median {:.2} %, range [{:.2}, {:.2}]",
                    r.layer, r.stats.median, r.stats.min, r.stats.max
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { common, checkpoint, p } => {
            let cfg = common.load(ExperimentKind::Train)?;
            let est = harness::run_eval(&cfg, &checkpoint, p).context("evaluation failed")?;
            println!(
                "accuracy {:.2} ± {:.2} % ({} trials{})",
                est.mean,
                est.ci_halfwidth,
                est.trials,
                if est.converged { "" } else { ", not converged" }
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
