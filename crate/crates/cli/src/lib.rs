//! Experiment runner for `jdr-core`: configuration files, seeded runs and
//! result files.

pub mod bootstrap;
pub mod config;
pub mod error;
pub mod kv;
pub mod output;
pub mod runner;
pub mod tables;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use runner::{run_experiment, run_to_dir, ResultRecord, RunOutcome};
pub use tables::replay_table5;
