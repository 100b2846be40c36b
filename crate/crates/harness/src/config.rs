use std::path::Path;

use fedsurv_core::dataset::{CsvOptions, Dataset};
use fedsurv_core::federation::{UpdateMethod, UpdateWeighting};
use fedsurv_core::forest::ForestParams;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

/// How each client's rows are split into train and test sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    /// `n_folds`-fold cross-validation per client.
    #[default]
    KFold,
    /// Repeated random train/test splits.
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_clients: usize,
    pub withhold_fraction: f64,
    pub n_site_splits: usize,
    pub n_folds: usize,
    pub resampling: Resampling,
    pub mccv_rounds: usize,
    pub mccv_test_fraction: f64,
    pub update_method: UpdateMethod,
    pub update_weighting: UpdateWeighting,
    pub seed: u64,
    /// Worker threads for experiment cells; 0 uses every core.
    pub threads: usize,
    pub forest: ForestParams,
    pub data: DataConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub time_column: String,
    pub event_column: String,
    /// Declared categorical columns; empty means infer from the values.
    pub categorical: Vec<String>,
}

impl DataConfig {
    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            time_column: self.time_column.clone(),
            event_column: self.event_column.clone(),
            categorical: (!self.categorical.is_empty()).then(|| self.categorical.iter().cloned().collect()),
        }
    }

    pub fn load(&self, path: impl AsRef<Path>) -> Result<Dataset> {
        Ok(Dataset::from_csv_path(path, &self.csv_options())?)
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            time_column: "time".into(),
            event_column: "event".into(),
            categorical: Vec::new(),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_clients: 10,
            withhold_fraction: 0.35,
            n_site_splits: 5,
            n_folds: 5,
            resampling: Resampling::KFold,
            mccv_rounds: 50,
            mccv_test_fraction: 0.3,
            update_method: UpdateMethod::Constant,
            update_weighting: UpdateWeighting::Equal,
            seed: 20240917,
            threads: 0,
            forest: ForestParams::default(),
            data: DataConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.n_clients == 0 {
            return bad("n_clients must be >= 1");
        }
        if !(0.0..1.0).contains(&self.withhold_fraction) {
            return bad("withhold_fraction must lie in [0, 1)");
        }
        if self.n_site_splits == 0 {
            return bad("n_site_splits must be >= 1");
        }
        match self.resampling {
            Resampling::KFold if self.n_folds < 2 => return bad("n_folds must be >= 2"),
            Resampling::MonteCarlo if self.mccv_rounds == 0 => return bad("mccv_rounds must be >= 1"),
            Resampling::MonteCarlo if !(self.mccv_test_fraction > 0.0 && self.mccv_test_fraction < 1.0) => {
                return bad("mccv_test_fraction must lie in (0, 1)")
            }
            _ => {}
        }
        self.forest.validate()?;
        Ok(())
    }

    /// Number of resampling units per site split.
    pub fn n_units(&self) -> usize {
        match self.resampling {
            Resampling::KFold => self.n_folds,
            Resampling::MonteCarlo => self.mccv_rounds,
        }
    }
}
