#![allow(dead_code)]

use fedsurv_core::dataset::Dataset;
use fedsurv_core::forest::ForestParams;
use fedsurv_harness::config::DataConfig;
use fedsurv_harness::ExperimentConfig;

pub fn gbsg2_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/gbsg2.csv")
}

pub fn gbsg2() -> Dataset {
    DataConfig::default().load(gbsg2_path()).unwrap()
}

/// A configuration small enough to run in a couple of seconds.
pub fn quick(n_clients: usize) -> ExperimentConfig {
    ExperimentConfig {
        n_clients,
        n_site_splits: 2,
        n_folds: 3,
        seed: 99,
        threads: 2,
        forest: ForestParams {
            n_estimators: 12,
            ..ForestParams::default()
        },
        ..ExperimentConfig::default()
    }
}
