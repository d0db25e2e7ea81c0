//! Command-line experiment harness for the clusterwise regression solvers.

pub mod algo;
pub mod commands;
pub mod experiment;
pub mod metrics;

pub use algo::{run_algorithm, Algorithm, RunOutput};
pub use commands::{Cli, CliError, Command};
pub use experiment::{read_records, run_experiment, write_outputs, ExperimentConfig, InstanceSpec, RunRecord, TraceRow};
