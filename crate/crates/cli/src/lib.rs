//! Configuration, commands and output formats behind the `bhs` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{cmd_benchmark, cmd_gentest, cmd_run, cmd_truth};
pub use config::ExperimentConfig;
