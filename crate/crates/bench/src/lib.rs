//! Experiment harness for the bicausal transport solvers: config parsing,
//! seeded repetitions against the Gaussian closed form, and CSV reports.

pub mod config;
pub mod experiment;
pub mod report;

use std::path::PathBuf;

pub use config::{parse_config, parse_pairs, Clip, ConfigError, ExperimentConfig, Method};
pub use experiment::{actual_value, mean_sd, rep_seed, run_experiment, run_once};
pub use report::{format_g, read_csv, write_csv, ExperimentReport, ReportRow, CSV_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("model: {0}")]
    Model(String),
    #[error("tree: {0}")]
    Tree(#[from] fviot_core::tree::TreeError),
    #[error("bicausal solver: {0}")]
    Bicausal(#[from] fviot_core::bicausal::BicausalError),
    #[error("fvi: {0}")]
    Fvi(#[from] fviot_core::fvi::FviError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}
