//! Robustness benchmark harness: dataset ingestion, the embed → train →
//! attack → report pipeline, and report emission.

pub mod cache;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod idx;
pub mod report;
pub mod seeds;

pub use config::ExperimentConfig;
pub use error::BenchError;
pub use experiment::{run_experiment, RunDir};
pub use report::RobustnessReport;
