//! Experiment harness for `hymlab`: configuration, mode dispatch, output
//! sinks and the acceptance suite.

pub mod config;
pub mod output;
pub mod run;
pub mod validate;

pub use config::ExperimentConfig;
pub use run::{run, CliError, RunManifest};
