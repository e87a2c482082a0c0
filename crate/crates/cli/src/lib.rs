//! Command-line front end for proxwarm: run configuration, stage
//! orchestration, artifact emission and Monte-Carlo sweeps.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod montecarlo;
pub mod pipeline;

pub use config::{InitialCov, PipelineConfig, ScenarioSource, WarmStartSource};
pub use error::{CliError, CliResult};
pub use montecarlo::{run_montecarlo, Method, MonteCarloReport};
pub use pipeline::{run_cluster, run_filter, run_pipeline, run_solve, RunReport};
