//! Run manifest: everything needed to audit or repeat a simulation.

use std::collections::BTreeMap;

use fedsurv_core::dataset::Dataset;
use fedsurv_core::forest::RISK_RULE;
use fedsurv_core::survival::CONCORDANCE_RULE;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::experiment::{retained_features, RunRecord};
use crate::split::withhold_count;
use crate::Result;

/// How Fed(k) records are produced when k is below the client count.
pub const FED_EVALUATION: &str =
    "Fed(k) federates clients 0..k and evaluates every client; clients outside the federation keep their local forest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_rows: usize,
    pub n_events: usize,
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    /// Covariates withheld per client, out of `dataset.covariates`.
    pub withhold_count: usize,
    /// `[site_split][client]` retained covariates, shared by all folds.
    pub retained_features: Vec<Vec<Vec<String>>>,
    pub risk_rule: String,
    pub c_index_rule: String,
    pub fed_evaluation: String,
    pub records_per_configuration: BTreeMap<String, usize>,
    pub n_excluded: usize,
}

impl RunManifest {
    pub fn build(config: &ExperimentConfig, data: &Dataset, records: &[RunRecord]) -> Result<Self> {
        let mut per_config = BTreeMap::new();
        for r in records {
            *per_config.entry(r.configuration.to_string()).or_insert(0) += 1;
        }
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            dataset: DatasetSummary {
                n_rows: data.n_rows(),
                n_events: data.n_events(),
                covariates: data.feature_names().to_vec(),
            },
            withhold_count: withhold_count(data.feature_names().len(), config.withhold_fraction),
            retained_features: retained_features(config, data)?,
            risk_rule: RISK_RULE.to_string(),
            c_index_rule: CONCORDANCE_RULE.to_string(),
            fed_evaluation: FED_EVALUATION.to_string(),
            records_per_configuration: per_config,
            n_excluded: records.iter().filter(|r| r.excluded()).count(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}
