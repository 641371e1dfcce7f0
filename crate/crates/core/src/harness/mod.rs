//! Configuration, sweep execution and output for reproducible experiments.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind, ParsedConfig};
pub use output::{emit_csv, to_csv, Manifest};
pub use runner::{run_experiment, run_experiment_with_threads, Row, SweepResult};
