#![allow(dead_code)]

use std::path::PathBuf;

use fedsurv_core::dataset::{CsvOptions, Dataset};
use fedsurv_core::forest::ForestParams;
use fedsurv_transport::LocalSite;

pub const CLIENT_SEED: u64 = 7;
pub const ROUND_SEED: u64 = 11;

pub fn gbsg2() -> Dataset {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/gbsg2.csv");
    let opts = CsvOptions {
        categorical: Some(["horTh", "menostat", "tgrade"].map(String::from).into()),
        ..CsvOptions::default()
    };
    Dataset::from_csv_path(path, &opts).unwrap()
}

pub fn small_forest() -> ForestParams {
    ForestParams {
        n_estimators: 12,
        ..ForestParams::default()
    }
}

/// `k` disjoint row blocks with nested feature sets: site `c` lacks the
/// first `k - 1 - c` covariates.
pub fn sites(k: usize) -> Vec<LocalSite> {
    let data = gbsg2();
    let names = data.feature_names().to_vec();
    (0..k)
        .map(|c| {
            let rows: Vec<usize> = (0..data.n_rows()).filter(|r| r % k == c).collect();
            let kept: Vec<&String> = names
                .iter()
                .enumerate()
                .filter(|(j, _)| *j + c + 1 >= k)
                .map(|(_, n)| n)
                .collect();
            let local = data.select_rows(&rows).select_features(&kept).unwrap();
            LocalSite::prepare(format!("c{}", c + 1), &local, 0.25, CLIENT_SEED).unwrap()
        })
        .collect()
}
