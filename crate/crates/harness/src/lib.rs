//! Experiment harness for `neurolife`: JSON configuration, multi-seed
//! orchestration, CSV and manifest emission, built-in correctness checks,
//! MNIST download, and the `neurolife` command line.

pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fetch;

pub use cli::cli_main;
pub use config::{Architecture, ExperimentConfig, ExperimentKind, Preset};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, run_experiment_with, ExperimentData, ManifestSummary, Results};
