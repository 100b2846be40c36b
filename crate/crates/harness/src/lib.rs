//! Experiment driver for federated survival forests under feature-space
//! heterogeneity.

pub mod config;
pub mod experiment;
pub mod manifest;
pub mod records;
pub mod report;
pub mod simulate;
pub mod split;
pub mod stats;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, Configuration, RunRecord};
pub use manifest::RunManifest;
pub use simulate::{simulate, Simulation};
pub use stats::PairedTestResult;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] fedsurv_core::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("no features left")]
    NoFeaturesLeft,
    #[error("too few rows: {rows} available, {needed} needed")]
    TooFewRows { rows: usize, needed: usize },
    #[error("statistics: {0}")]
    Stats(String),
    #[error("records: {0}")]
    Records(String),
    #[error("empty record set")]
    EmptyRecords,
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        Self::Records(e.to_string())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
