//! Config-driven experiment runner behind the `fcadmm` binary.

pub mod config;
pub mod runner;
pub mod weights;

pub use config::{ConfigError, ExperimentConfig, Hyper, Task};
pub use runner::{compare, render_summary, render_table, run_experiment, write_artifacts, RunOptions, RunResult};
