//! The heterogeneity simulation: site splits, per-client resampling and the
//! four reference configurations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use fedsurv_core::dataset::{one_hot, Dataset};
use fedsurv_core::federation::{self, site_features, LocalModel};
use fedsurv_core::forest::{fit_forest, Forest, ForestParams};
use fedsurv_core::schema::{align_table, make_schema, merge_schemas, FederatedSchema, MergeOptions};
use fedsurv_core::seeding::{derive_seed, label, stream};
use fedsurv_core::survival::{concordance, Outcome};
use fedsurv_core::table::Table;
use fedsurv_core::Error as CoreError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Resampling};
use crate::split::{make_folds, monte_carlo_split, partition_clients, withhold_features};
use crate::{HarnessError, Result};

const TAG_LOCAL: u64 = 1;
const TAG_FED: u64 = 2;
const TAG_CSRF: u64 = 3;
const TAG_CENTRAL: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Configuration {
    Local,
    /// Federation over the first `k` clients.
    Fed(usize),
    CentralizedSrf,
    Centralized,
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Local => f.write_str("Local"),
            Self::Fed(k) => write!(f, "Fed({k})"),
            Self::CentralizedSrf => f.write_str("Centralized-SRF"),
            Self::Centralized => f.write_str("Centralized"),
        }
    }
}

impl FromStr for Configuration {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Local" => Ok(Self::Local),
            "Centralized-SRF" => Ok(Self::CentralizedSrf),
            "Centralized" => Ok(Self::Centralized),
            _ => s
                .strip_prefix("Fed(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|k| k.parse().ok())
                .map(Self::Fed)
                .ok_or_else(|| HarnessError::Records(format!("unknown configuration `{s}`"))),
        }
    }
}

impl Serialize for Configuration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One evaluation of one configuration on one client's test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub configuration: Configuration,
    pub site_split: usize,
    /// Fold index, or round index under Monte-Carlo resampling.
    pub fold: usize,
    pub client: usize,
    /// Empty when the test rows have no comparable pair.
    pub c_index: Option<f64>,
    pub n_test: usize,
    pub n_comparable_pairs: usize,
    pub seed: u64,
}

impl RunRecord {
    pub fn excluded(&self) -> bool {
        self.c_index.is_none()
    }

    fn key(&self) -> (Configuration, usize, usize, usize) {
        (self.configuration, self.site_split, self.fold, self.client)
    }
}

/// One client within a site split.
#[derive(Debug, Clone)]
pub struct ClientData {
    pub index: usize,
    pub id: String,
    /// Cohort row indices, ascending.
    pub rows: Vec<usize>,
    /// Pre-encoding covariates kept after withholding.
    pub retained: Vec<String>,
    /// Encoded and aligned to the federated columns.
    pub table: Table<f64>,
    pub outcomes: Vec<Outcome<f64>>,
    /// Available features in table column order.
    pub features: Vec<String>,
    /// (train, test) positions into `rows`, one pair per fold or round.
    pub units: Vec<(Vec<usize>, Vec<usize>)>,
}

#[derive(Debug, Clone)]
pub struct SiteSplit {
    pub index: usize,
    pub federated: FederatedSchema,
    pub clients: Vec<ClientData>,
}

pub fn client_id(c: usize) -> String {
    format!("client_{c}")
}

/// Partitions the cohort, withholds and encodes features per client, merges
/// the schemas and fixes every client's resampling units.
pub fn prepare_site_split(config: &ExperimentConfig, data: &Dataset, s: usize) -> Result<SiteSplit> {
    let seed = config.seed;
    let n_units = config.n_units();
    let min_rows = config.n_clients * if config.resampling == Resampling::KFold { n_units } else { 2 };
    if data.n_rows() < min_rows {
        return Err(HarnessError::TooFewRows {
            rows: data.n_rows(),
            needed: min_rows,
        });
    }
    let parts = partition_clients(
        data.n_rows(),
        config.n_clients,
        &mut stream(derive_seed(seed, &[s as u64]), label("partition")),
    )?;

    let mut encoded = Vec::with_capacity(parts.len());
    for (c, rows) in parts.into_iter().enumerate() {
        let path = [s as u64, c as u64];
        let retained = withhold_features(
            data.feature_names(),
            config.withhold_fraction,
            &mut stream(derive_seed(seed, &path), label("withhold")),
        )?;
        let local = data.select_rows(&rows).select_features(&retained)?;
        let table = one_hot(&local)?;
        let mut rng = stream(derive_seed(seed, &path), label("resample"));
        let units = match config.resampling {
            Resampling::KFold => {
                let folds = make_folds(rows.len(), config.n_folds, &mut rng)?;
                (0..config.n_folds)
                    .map(|f| {
                        let (test, train): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| folds[i] == f);
                        (train, test)
                    })
                    .collect()
            }
            Resampling::MonteCarlo => (0..config.mccv_rounds)
                .map(|_| monte_carlo_split(rows.len(), config.mccv_test_fraction, &mut rng))
                .collect::<Result<_>>()?,
        };
        encoded.push((rows, retained, table, local.outcomes().to_vec(), units));
    }

    let schemas = encoded
        .iter()
        .enumerate()
        .map(|(c, e)| Ok((client_id(c), make_schema(e.2.columns(), None, false)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let federated = merge_schemas(&schemas, &MergeOptions::default())?;

    let clients = encoded
        .into_iter()
        .enumerate()
        .map(|(c, (rows, retained, table, outcomes, units))| {
            let id = client_id(c);
            let table = align_table(&table, &federated, &id)?;
            let available = site_features(&table);
            let features = table
                .columns()
                .iter()
                .filter(|n| available.contains(*n))
                .cloned()
                .collect();
            Ok(ClientData {
                index: c,
                id,
                rows,
                retained,
                table,
                outcomes,
                features,
                units,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SiteSplit {
        index: s,
        federated,
        clients,
    })
}

fn pick<T: Copy>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i]).collect()
}

fn evaluate(
    configuration: Configuration,
    s: usize,
    u: usize,
    client: usize,
    seed: u64,
    risk: &[f64],
    outcomes: &[Outcome<f64>],
) -> Result<RunRecord> {
    let (c_index, pairs) = match concordance(risk, outcomes) {
        Ok(c) => (Some(c.c_index), c.comparable_pairs),
        Err(CoreError::NoComparablePairs) => (None, 0),
        Err(e) => return Err(e.into()),
    };
    Ok(RunRecord {
        configuration,
        site_split: s,
        fold: u,
        client,
        c_index,
        n_test: outcomes.len(),
        n_comparable_pairs: pairs,
        seed,
    })
}

/// Fills missing cells of column `j` with a value below the column's
/// smallest observed training value, so "missing" forms its own lowest bin.
fn missing_as_lowest(train: &Table<f64>) -> Vec<f64> {
    (0..train.n_cols())
        .map(|j| {
            let lo = train
                .column_at(j)
                .iter()
                .copied()
                .filter(|v| !v.is_nan())
                .fold(f64::INFINITY, f64::min);
            if lo.is_finite() {
                lo - 1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Local forests of every client for one resampling unit.
fn fit_locals(
    config: &ExperimentConfig,
    split: &SiteSplit,
    u: usize,
    params: &ForestParams,
) -> Result<Vec<LocalModel<f64>>> {
    split
        .clients
        .par_iter()
        .map(|cl| {
            let (train, _) = &cl.units[u];
            let seed = derive_seed(config.seed, &[TAG_LOCAL, split.index as u64, u as u64, cl.index as u64]);
            let forest = fit_forest(
                &cl.table.select_rows(train),
                &pick(&cl.outcomes, train),
                params,
                &cl.features,
                seed,
            )?;
            Ok(LocalModel::new(
                forest,
                cl.id.clone(),
                cl.features.iter().cloned().collect::<BTreeSet<_>>(),
                config.update_method,
                config.update_weighting,
            )?)
        })
        .collect()
}

fn run_cell(config: &ExperimentConfig, split: &SiteSplit, full: &Table<f64>, data: &Dataset, u: usize) -> Result<Vec<RunRecord>> {
    let s = split.index;
    let k_max = split.clients.len();
    let params = ForestParams {
        n_jobs: None,
        ..config.forest.clone()
    };
    let locals = fit_locals(config, split, u, &params)?;
    let tests: Vec<(Table<f64>, Vec<Outcome<f64>>)> = split
        .clients
        .iter()
        .map(|cl| {
            let test = &cl.units[u].1;
            (cl.table.select_rows(test), pick(&cl.outcomes, test))
        })
        .collect();

    let mut jobs: Vec<Configuration> = vec![Configuration::Local];
    jobs.extend((2..=k_max).map(Configuration::Fed));
    jobs.extend([Configuration::CentralizedSrf, Configuration::Centralized]);

    let per_job = jobs
        .par_iter()
        .map(|&job| -> Result<Vec<RunRecord>> {
            match job {
                Configuration::Local => {
                    let seed = derive_seed(config.seed, &[TAG_LOCAL, s as u64, u as u64]);
                    locals
                        .iter()
                        .zip(&tests)
                        .enumerate()
                        .map(|(c, (m, (x, y)))| evaluate(job, s, u, c, seed, &m.predict_risk(x)?, y))
                        .collect()
                }
                Configuration::Fed(k) => {
                    let seed = derive_seed(config.seed, &[TAG_FED, s as u64, u as u64, k as u64]);
                    let fed = federation::federate(locals[..k].to_vec(), seed)?;
                    // clients outside the federation keep their local forest
                    (0..k_max)
                        .map(|c| {
                            let (x, y) = &tests[c];
                            let model = fed.get(&split.clients[c].id).unwrap_or(&locals[c]);
                            evaluate(job, s, u, c, seed, &model.predict_risk(x)?, y)
                        })
                        .collect()
                }
                Configuration::CentralizedSrf => {
                    let seed = derive_seed(config.seed, &[TAG_CSRF, s as u64, u as u64]);
                    let trains: Vec<Table<f64>> = split
                        .clients
                        .iter()
                        .map(|cl| cl.table.select_rows(&cl.units[u].0))
                        .collect();
                    let train = Table::vstack(&trains.iter().collect::<Vec<_>>())?;
                    let fill = missing_as_lowest(&train);
                    let outcomes: Vec<Outcome<f64>> = split
                        .clients
                        .iter()
                        .flat_map(|cl| pick(&cl.outcomes, &cl.units[u].0))
                        .collect();
                    let forest = fit_forest(
                        &train.fill_missing(|j| fill[j]),
                        &outcomes,
                        &params,
                        train.columns(),
                        seed,
                    )?;
                    eval_all(job, s, u, seed, &forest, tests.iter().map(|(x, y)| (x.fill_missing(|j| fill[j]), y)))
                }
                Configuration::Centralized => {
                    let seed = derive_seed(config.seed, &[TAG_CENTRAL, s as u64, u as u64]);
                    let cohort = |cl: &ClientData, test: bool| -> Vec<usize> {
                        let (train, held) = &cl.units[u];
                        let pos = if test { held } else { train };
                        pos.iter().map(|&i| cl.rows[i]).collect()
                    };
                    let train_rows: Vec<usize> = split.clients.iter().flat_map(|cl| cohort(cl, false)).collect();
                    let forest = fit_forest(
                        &full.select_rows(&train_rows),
                        &pick(data.outcomes(), &train_rows),
                        &params,
                        full.columns(),
                        seed,
                    )?;
                    let test_sets: Vec<(Table<f64>, Vec<Outcome<f64>>)> = split
                        .clients
                        .iter()
                        .map(|cl| {
                            let rows = cohort(cl, true);
                            (full.select_rows(&rows), pick(data.outcomes(), &rows))
                        })
                        .collect();
                    eval_all(job, s, u, seed, &forest, test_sets.iter().map(|(x, y)| (x.clone(), y)))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

fn eval_all<'a>(
    job: Configuration,
    s: usize,
    u: usize,
    seed: u64,
    forest: &Forest<f64>,
    tests: impl Iterator<Item = (Table<f64>, &'a Vec<Outcome<f64>>)>,
) -> Result<Vec<RunRecord>> {
    tests
        .enumerate()
        .map(|(c, (x, y))| evaluate(job, s, u, c, seed, &forest.predict_risk(&x)?, y))
        .collect()
}

/// Runs every (site split, unit) cell and returns the records sorted by
/// (configuration, site split, fold, client).
pub fn run_experiment(config: &ExperimentConfig, data: &Dataset) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    pool.install(|| {
        let full = one_hot(data)?;
        let splits = (0..config.n_site_splits)
            .into_par_iter()
            .map(|s| prepare_site_split(config, data, s))
            .collect::<Result<Vec<_>>>()?;
        let cells: Vec<(usize, usize)> = (0..config.n_site_splits)
            .flat_map(|s| (0..config.n_units()).map(move |u| (s, u)))
            .collect();
        let mut records: Vec<RunRecord> = cells
            .par_iter()
            .map(|&(s, u)| run_cell(config, &splits[s], &full, data, u))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        records.sort_by_key(RunRecord::key);
        Ok(records)
    })
}

/// Per-split, per-client retained covariates; folds share them by
/// construction.
pub fn retained_features(config: &ExperimentConfig, data: &Dataset) -> Result<Vec<Vec<Vec<String>>>> {
    (0..config.n_site_splits)
        .map(|s| Ok(prepare_site_split(config, data, s)?.clients.into_iter().map(|c| c.retained).collect()))
        .collect()
}
