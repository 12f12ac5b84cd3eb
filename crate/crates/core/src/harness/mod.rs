//! Experiment orchestration: configuration, datasets, persistence, plots
//! and the experiment drivers behind the CLI.

pub mod config;
pub mod csvio;
pub mod dataset;
pub mod experiments;
pub mod idx;
pub mod plot;

pub use config::{load_config, ExperimentConfig, ExperimentKind};
pub use dataset::load_dataset;
pub use experiments::{
    run_eval, run_pareto, run_sensitivity, run_train, run_uniform_sweep, ParetoPoint, ParetoSummary,
    SensitivitySummary, SweepSummary, TrainSummary, UniformPoint,
};
