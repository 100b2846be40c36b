//! Client-side data handling shared by the networked client and the
//! in-process reference round.

use std::collections::{BTreeMap, BTreeSet};

use fedsurv_core::dataset::{one_hot, Dataset};
use fedsurv_core::federation::{federate, LocalModel, UpdateMethod, UpdateWeighting};
use fedsurv_core::forest::{fit_forest, Forest, ForestParams};
use fedsurv_core::schema::{align_table, make_schema, merge_schemas, DatasetSchema, FederatedSchema, MergeOptions};
use fedsurv_core::seeding::{derive_seed, label, stream};
use fedsurv_core::survival::{concordance, Outcome};
use fedsurv_core::table::Table;
use fedsurv_core::Error as CoreError;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TransportError};

/// A client's encoded local data, split into train and held-out rows.
#[derive(Debug, Clone)]
pub struct LocalSite {
    id: String,
    table: Table<f64>,
    outcomes: Vec<Outcome<f64>>,
    train_rows: Vec<usize>,
    test_rows: Vec<usize>,
    schema: DatasetSchema,
}

impl LocalSite {
    /// One-hot encodes `data` and holds out `test_fraction` of its rows,
    /// drawn from a stream keyed by `seed` and the client id.
    pub fn prepare(id: impl Into<String>, data: &Dataset, test_fraction: f64, seed: u64) -> Result<Self> {
        let id = id.into();
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(TransportError::Config(format!("test fraction {test_fraction} not in (0, 1)")));
        }
        let n = data.n_rows();
        if n < 2 {
            return Err(CoreError::EmptyDataset.into());
        }
        let table = one_hot(data)?;
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut stream(derive_seed(seed, &[label(&id)]), label("holdout")));
        let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut test_rows = rows[..n_test].to_vec();
        let mut train_rows = rows[n_test..].to_vec();
        test_rows.sort_unstable();
        train_rows.sort_unstable();
        let schema = make_schema(table.columns(), None, true)?;
        Ok(Self {
            id,
            table,
            outcomes: data.outcomes().to_vec(),
            train_rows,
            test_rows,
            schema,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn n_train(&self) -> usize {
        self.train_rows.len()
    }

    /// Aligns to the federated schema and fits the local forest on the
    /// site's complete columns.
    pub fn fit(&self, federated: &FederatedSchema, params: &ForestParams, seed: u64) -> Result<FittedSite> {
        let aligned = align_table(&self.table, federated, &self.id)?;
        let features = aligned.complete_columns();
        if features.is_empty() {
            return Err(CoreError::NoUsableFeatures.into());
        }
        let pick = |rows: &[usize]| rows.iter().map(|&i| self.outcomes[i]).collect::<Vec<_>>();
        let train = aligned.select_rows(&self.train_rows);
        let forest = fit_forest(
            &train,
            &pick(&self.train_rows),
            params,
            &features,
            derive_seed(seed, &[label(&self.id), label("forest")]),
        )?;
        Ok(FittedSite {
            id: self.id.clone(),
            forest,
            site_features: features.into_iter().collect(),
            test: aligned.select_rows(&self.test_rows),
            test_outcomes: pick(&self.test_rows),
        })
    }
}

#[derive(Debug, Clone)]
pub struct FittedSite {
    pub id: String,
    pub forest: Forest<f64>,
    pub site_features: BTreeSet<String>,
    pub test: Table<f64>,
    pub test_outcomes: Vec<Outcome<f64>>,
}

/// Held-out discrimination of a model. `c_index` is `None` when the
/// held-out rows have no comparable pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub c_index: Option<f64>,
    pub n_test: usize,
    pub n_comparable_pairs: usize,
}

impl FittedSite {
    pub fn model(&self, method: UpdateMethod, weighting: UpdateWeighting) -> Result<LocalModel<f64>> {
        Ok(LocalModel::new(
            self.forest.clone(),
            self.id.clone(),
            self.site_features.clone(),
            method,
            weighting,
        )?)
    }

    pub fn evaluate(&self, model: &LocalModel<f64>) -> Result<Evaluation> {
        let risk = model.predict_risk(&self.test)?;
        let (c_index, n_comparable_pairs) = match concordance(&risk, &self.test_outcomes) {
            Ok(c) => (Some(c.c_index), c.comparable_pairs),
            Err(CoreError::NoComparablePairs) => (None, 0),
            Err(e) => return Err(e.into()),
        };
        Ok(Evaluation {
            c_index,
            n_test: self.test_outcomes.len(),
            n_comparable_pairs,
        })
    }
}

/// Settings the coordinator applies to the whole round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundParams {
    pub merge: MergeOptions,
    pub update_method: UpdateMethod,
    pub update_weighting: UpdateWeighting,
    /// Seed of the active-set sampling.
    pub seed: u64,
}

impl Default for RoundParams {
    fn default() -> Self {
        Self {
            merge: MergeOptions::default(),
            update_method: UpdateMethod::Constant,
            update_weighting: UpdateWeighting::Equal,
            seed: 0,
        }
    }
}

/// The whole protocol without a network: merge, fit, federate. Sites are
/// pooled in the order given.
pub fn federate_in_process(
    sites: &[LocalSite],
    round: &RoundParams,
    forest: &ForestParams,
    client_seed: u64,
) -> Result<BTreeMap<String, (FittedSite, LocalModel<f64>)>> {
    let schemas = sites.iter().map(|s| (s.id.clone(), s.schema.clone())).collect();
    let federated = merge_schemas(&schemas, &round.merge)?;
    let fitted = sites
        .iter()
        .map(|s| s.fit(&federated, forest, client_seed))
        .collect::<Result<Vec<_>>>()?;
    let models = fitted
        .iter()
        .map(|f| f.model(round.update_method, round.update_weighting))
        .collect::<Result<Vec<_>>>()?;
    let mut merged = federate(models, round.seed)?;
    Ok(fitted
        .into_iter()
        .map(|f| {
            let m = merged.remove(&f.id).expect("federate returns every site");
            (f.id.clone(), (f, m))
        })
        .collect())
}
