//! Config-driven experiment runner on top of `kerflow-core`.
//!
//! A config names an experiment kind plus the builtins it needs; running it
//! produces an [`ExperimentReport`] with named checks, scalar values and
//! refinement curves.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod config;
pub mod report;
pub mod run;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig, ExperimentKind};
pub use report::{Check, Curve, ExperimentReport, Status};
pub use run::{run_experiment, validate, RunOptions};

/// Parse and run a config held in memory.
pub fn run_str(text: &str, options: &RunOptions) -> Result<ExperimentReport, ConfigError> {
    run_experiment(&parse_config_str(text)?, options)
}
