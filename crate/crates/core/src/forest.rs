//! Random survival forest: bootstrap ensemble of survival trees.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeding;
use crate::survival::{cmp_scalar, concordance, Outcome, StepFunction};
use crate::table::{FeatureLookup, Table};
use crate::tree::{fit_tree_on_samples, SurvivalTree, TreeParams};

/// Recorded in every serialized forest so alternative combination rules can
/// be told apart later.
pub const RISK_RULE: &str = "mean_of_tree_chf_sums_over_tree_event_grid";

/// Per-tree bootstrap sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxSamples {
    Count(usize),
    /// In (0, 1]; resolves to `max(1, floor(fraction * n))`.
    Fraction(f64),
}

impl MaxSamples {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            MaxSamples::Count(k) => k,
            MaxSamples::Fraction(f) => ((f * n as f64).floor() as usize).max(1),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            MaxSamples::Count(0) => Err(Error::InvalidParam("max_samples must be >= 1".into())),
            MaxSamples::Fraction(f) if !(f > 0.0 && f <= 1.0) => {
                Err(Error::InvalidParam(format!("max_samples fraction {f} not in (0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MaxSamplesRepr {
    Count(usize),
    Fraction(f64),
}

impl Serialize for MaxSamples {
    fn serialize<Z: Serializer>(&self, s: Z) -> Result<Z::Ok, Z::Error> {
        match *self {
            MaxSamples::Count(k) => MaxSamplesRepr::Count(k),
            MaxSamples::Fraction(f) => MaxSamplesRepr::Fraction(f),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MaxSamples {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let m = match MaxSamplesRepr::deserialize(d)? {
            MaxSamplesRepr::Count(k) => MaxSamples::Count(k),
            MaxSamplesRepr::Fraction(f) => MaxSamples::Fraction(f),
        };
        m.validate().map_err(D::Error::custom)?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub bootstrap: bool,
    pub max_samples: Option<MaxSamples>,
    pub oob_score: bool,
    /// `None`/1 = serial, -1 = all cores, k = k threads.
    pub n_jobs: Option<i32>,
    pub random_state: Option<u64>,
    pub low_memory: bool,
    #[serde(flatten)]
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            bootstrap: true,
            max_samples: None,
            oob_score: false,
            n_jobs: None,
            random_state: None,
            low_memory: false,
            tree: TreeParams::default(),
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidParam("n_estimators must be >= 1".into()));
        }
        if let Some(m) = self.max_samples {
            m.validate()?;
        }
        if matches!(self.n_jobs, Some(j) if j == 0 || j < -1) {
            return Err(Error::InvalidParam("n_jobs must be None, -1 or positive".into()));
        }
        if self.oob_score && !self.bootstrap {
            return Err(Error::OobRequiresBootstrap);
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Forest<S> {
    trees: Vec<Arc<SurvivalTree<S>>>,
    params: ForestParams,
    feature_order: Vec<String>,
    train_size: usize,
    #[serde(default)]
    oob_c_index: Option<S>,
    #[serde(default = "default_risk_rule")]
    risk_rule: String,
    /// Per-tree in-bag counts per training row. Row-level; never serialized.
    #[serde(skip)]
    in_bag: Option<Vec<Vec<u32>>>,
}

fn default_risk_rule() -> String {
    RISK_RULE.to_string()
}

/// Fits a forest with an explicit master seed.
pub fn fit_forest<S: Scalar>(
    table: &Table<S>,
    outcomes: &[Outcome<S>],
    params: &ForestParams,
    available_features: &[String],
    seed: u64,
) -> Result<Forest<S>> {
    let params = ForestParams {
        random_state: Some(seed),
        ..params.clone()
    };
    Forest::fit(table, outcomes, &params, available_features)
}

impl<S: Scalar> Forest<S> {
    /// Fits on every row of `table`. Tree `t` draws from stream `t` of the
    /// master seed, so the result does not depend on `n_jobs`.
    pub fn fit(
        table: &Table<S>,
        outcomes: &[Outcome<S>],
        params: &ForestParams,
        available_features: &[String],
    ) -> Result<Self> {
        params.validate()?;
        let n = table.n_rows();
        if n != outcomes.len() {
            return Err(Error::LengthMismatch {
                what: "feature rows vs outcomes",
                left: n,
                right: outcomes.len(),
            });
        }
        if n == 0 {
            return Err(Error::EmptyCohort);
        }
        if n < params.tree.min_samples_leaf {
            return Err(Error::InvalidParam(format!(
                "{n} samples is fewer than min_samples_leaf {}",
                params.tree.min_samples_leaf
            )));
        }
        let seed = params.random_state.unwrap_or_else(|| rand::rng().random());
        let draw = params.max_samples.map_or(n, |m| m.resolve(n));

        let fit_one = |t: usize| -> Result<(SurvivalTree<S>, Option<Vec<u32>>)> {
            let mut rng = seeding::stream(seed, t as u64);
            let (samples, counts) = if params.bootstrap {
                let samples: Vec<usize> = (0..draw).map(|_| rng.random_range(0..n)).collect();
                let mut counts = vec![0u32; n];
                for &i in &samples {
                    counts[i] += 1;
                }
                (samples, Some(counts))
            } else {
                ((0..n).collect(), None)
            };
            let mut tree = fit_tree_on_samples(table, outcomes, &params.tree, available_features, samples, &mut rng)?;
            tree.set_train_size(n);
            if params.low_memory {
                tree.drop_survival();
            }
            Ok((tree, counts))
        };

        let fitted: Vec<_> = match params.n_jobs {
            None | Some(1) => (0..params.n_estimators).map(fit_one).collect::<Result<_>>()?,
            Some(-1) => (0..params.n_estimators)
                .into_par_iter()
                .map(fit_one)
                .collect::<Result<_>>()?,
            Some(k) => rayon::ThreadPoolBuilder::new()
                .num_threads(k as usize)
                .build()
                .map_err(|e| Error::InvalidParam(e.to_string()))?
                .install(|| {
                    (0..params.n_estimators)
                        .into_par_iter()
                        .map(fit_one)
                        .collect::<Result<_>>()
                })?,
        };

        let (trees, in_bag): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
        let mut forest = Self {
            trees: trees.into_iter().map(Arc::new).collect(),
            params: ForestParams {
                random_state: Some(seed),
                ..params.clone()
            },
            feature_order: table.columns().to_vec(),
            train_size: n,
            oob_c_index: None,
            risk_rule: RISK_RULE.to_string(),
            in_bag: in_bag.into_iter().collect(),
        };
        if params.oob_score {
            forest.oob_c_index = Some(forest.oob_c_index(table, outcomes)?);
        }
        Ok(forest)
    }

    pub fn trees(&self) -> &[Arc<SurvivalTree<S>>] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn feature_order(&self) -> &[String] {
        &self.feature_order
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    pub fn stored_oob_c_index(&self) -> Option<S> {
        self.oob_c_index
    }

    pub fn risk_rule(&self) -> &str {
        &self.risk_rule
    }

    /// Stamps every tree with its originating site.
    pub fn set_origin_site(&mut self, site: &str) {
        for t in &mut self.trees {
            if t.origin_site() != site {
                Arc::make_mut(t).set_origin_site(site);
            }
        }
    }

    pub fn predict_risk(&self, table: &Table<S>) -> Result<Vec<S>> {
        forest_risk(&self.trees, table)
    }

    /// Out-of-bag concordance; rows that were in-bag for every tree are skipped.
    pub fn oob_c_index(&self, table: &Table<S>, outcomes: &[Outcome<S>]) -> Result<S> {
        let in_bag = self.in_bag.as_ref().ok_or(Error::OobRequiresBootstrap)?;
        if table.n_rows() != self.train_size || outcomes.len() != self.train_size {
            return Err(Error::LengthMismatch {
                what: "OOB rows vs training rows",
                left: table.n_rows(),
                right: self.train_size,
            });
        }
        let per_tree = self
            .trees
            .par_iter()
            .map(|t| t.risk_for_table(table))
            .collect::<Result<Vec<_>>>()?;
        let mut risks = Vec::new();
        let mut outs = Vec::new();
        for row in 0..self.train_size {
            let mut contrib: Vec<S> = per_tree
                .iter()
                .zip(in_bag)
                .filter(|(_, bag)| bag[row] == 0)
                .map(|(r, _)| r[row])
                .collect();
            if contrib.is_empty() {
                continue;
            }
            risks.push(sorted_mean(&mut contrib));
            outs.push(outcomes[row]);
        }
        if risks.is_empty() {
            return Err(Error::NoOobRows);
        }
        Ok(concordance(&risks, &outs)?.c_index)
    }

    /// Ensemble cumulative hazard on the union of the routed leaves' grids.
    pub fn predict_cumulative_hazard<L: FeatureLookup<S> + ?Sized>(&self, row: &L) -> Result<StepFunction<S>> {
        if self.params.low_memory {
            return Err(Error::LowMemory);
        }
        let fns = self
            .trees
            .iter()
            .map(|t| t.chf(row))
            .collect::<Result<Vec<_>>>()?;
        Ok(average_steps(&fns))
    }

    pub fn predict_survival<L: FeatureLookup<S> + ?Sized>(&self, row: &L) -> Result<StepFunction<S>> {
        if self.params.low_memory {
            return Err(Error::LowMemory);
        }
        let fns = self
            .trees
            .iter()
            .map(|t| t.survival(row))
            .collect::<Result<Vec<_>>>()?;
        Ok(average_steps(&fns))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidTree(e.to_string()))
    }
}

/// Mean of `values`, summed in sorted order so the result does not depend
/// on the order the trees were supplied in.
fn sorted_mean<S: Scalar>(values: &mut [S]) -> S {
    values.sort_by(cmp_scalar);
    let sum = values.iter().fold(S::zero(), |a, &v| a + v);
    sum / S::from_count(values.len())
}

/// Ensemble risk per row: the mean of per-tree risks.
pub fn forest_risk<S: Scalar>(trees: &[Arc<SurvivalTree<S>>], table: &Table<S>) -> Result<Vec<S>> {
    if trees.is_empty() {
        return Err(Error::InvalidParam("cannot predict with zero trees".into()));
    }
    let per_tree = trees
        .par_iter()
        .map(|t| t.risk_for_table(table))
        .collect::<Result<Vec<_>>>()?;
    let mut buf = Vec::with_capacity(trees.len());
    Ok((0..table.n_rows())
        .map(|row| {
            buf.clear();
            buf.extend(per_tree.iter().map(|r| r[row]));
            sorted_mean(&mut buf)
        })
        .collect())
}

fn average_steps<S: Scalar>(fns: &[StepFunction<S>]) -> StepFunction<S> {
    let mut grid: Vec<S> = fns.iter().flat_map(|f| f.times.iter().copied()).collect();
    grid.sort_by(cmp_scalar);
    grid.dedup();
    let k = S::from_count(fns.len());
    let before = fns.iter().fold(S::zero(), |a, f| a + f.value_before_first) / k;
    let values = grid
        .iter()
        .map(|&t| fns.iter().fold(S::zero(), |a, f| a + f.eval(t)) / k)
        .collect();
    StepFunction {
        times: grid,
        values,
        value_before_first: before,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{Leaf, MaxFeatures, Node};

    fn o(t: f64, e: bool) -> Outcome<f64> {
        Outcome::new(t, e).unwrap()
    }

    fn toy() -> (Table<f64>, Vec<Outcome<f64>>) {
        let n = 60;
        let x: Vec<f64> = (0..n).map(|i| (i % 7) as f64).collect();
        let z: Vec<f64> = (0..n).map(|i| ((i * 13) % 11) as f64).collect();
        let outs = (0..n)
            .map(|i| o(1.0 + ((i * 37) % 50) as f64 + x[i] * 3.0, i % 4 != 0))
            .collect();
        (Table::new(vec!["x".into(), "z".into()], vec![x, z]).unwrap(), outs)
    }

    fn feats() -> Vec<String> {
        vec!["x".into(), "z".into()]
    }

    fn leaf_tree(chf: f64) -> Arc<SurvivalTree<f64>> {
        Arc::new(
            SurvivalTree::from_nodes(
                vec![Node::Leaf(Leaf {
                    times: vec![1.0],
                    chf: vec![chf],
                    surv: Some(vec![0.5]),
                    n_samples: 2,
                })],
                "s",
                2,
            )
            .unwrap(),
        )
    }

    #[test]
    fn defaults_match_published_table() {
        let p = ForestParams::default();
        assert_eq!(p.n_estimators, 100);
        assert!(p.bootstrap);
        assert_eq!(p.max_samples, None);
        assert!(!p.oob_score && !p.low_memory);
        assert_eq!(p.tree.min_samples_split, 6);
        assert_eq!(p.tree.min_samples_leaf, 3);
        assert_eq!(p.tree.max_features, MaxFeatures::Sqrt);
    }

    #[test]
    fn fits_requested_number_of_trees() {
        let (t, y) = toy();
        let f = fit_forest(&t, &y, &ForestParams::default(), &feats(), 3).unwrap();
        assert_eq!(f.trees().len(), 100);
        assert_eq!(f.feature_order(), &feats()[..]);
    }

    #[test]
    fn no_bootstrap_all_features_gives_identical_trees() {
        let (t, y) = toy();
        let p = ForestParams {
            n_estimators: 5,
            bootstrap: false,
            tree: TreeParams {
                max_features: MaxFeatures::All,
                ..Default::default()
            },
            ..Default::default()
        };
        let f = fit_forest(&t, &y, &p, &feats(), 3).unwrap();
        assert!(f.trees().windows(2).all(|w| w[0] == w[1]));
        assert_eq!(f.oob_c_index(&t, &y), Err(Error::OobRequiresBootstrap));
    }

    #[test]
    fn seeded_fit_is_reproducible_and_parallel_safe() {
        let (t, y) = toy();
        let p = ForestParams {
            n_estimators: 20,
            ..Default::default()
        };
        let a = fit_forest(&t, &y, &p, &feats(), 11).unwrap().to_json();
        let b = fit_forest(&t, &y, &p, &feats(), 11).unwrap().to_json();
        let par = ForestParams {
            n_jobs: Some(-1),
            ..p.clone()
        };
        let c = fit_forest(&t, &y, &par, &feats(), 11).unwrap().to_json();
        let three = ForestParams { n_jobs: Some(3), ..p };
        let d = fit_forest(&t, &y, &three, &feats(), 11).unwrap().to_json();
        assert_eq!(a, b);
        assert_eq!(a, c.replace(r#""n_jobs":-1"#, r#""n_jobs":null"#));
        assert_eq!(a, d.replace(r#""n_jobs":3"#, r#""n_jobs":null"#));
    }

    #[test]
    fn ensemble_mean_arithmetic() {
        let table = Table::new(vec!["x".into()], vec![vec![0.0, 1.0]]).unwrap();
        assert_eq!(forest_risk(&[leaf_tree(1.0), leaf_tree(3.0)], &table).unwrap(), vec![2.0, 2.0]);
        let one = forest_risk(&[leaf_tree(5.0 / 3.0)], &table).unwrap();
        assert_eq!(one, vec![5.0 / 3.0; 2]);
        let a = forest_risk(&[leaf_tree(0.1), leaf_tree(0.7), leaf_tree(0.2)], &table).unwrap();
        let b = forest_risk(&[leaf_tree(0.2), leaf_tree(0.1), leaf_tree(0.7)], &table).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oob_requires_out_of_bag_rows() {
        let (t, y) = toy();
        // a single tree drawing n rows with replacement leaves some rows out,
        // so force the boundary with one row and one draw
        let single = Table::new(vec!["x".into()], vec![vec![1.0]]).unwrap();
        let p = ForestParams {
            n_estimators: 1,
            tree: TreeParams {
                min_samples_leaf: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let f = fit_forest(&single, &y[..1], &p, &["x".to_string()], 0).unwrap();
        assert_eq!(f.oob_c_index(&single, &y[..1]), Err(Error::NoOobRows));
        let f = fit_forest(&t, &y, &ForestParams::default(), &feats(), 1).unwrap();
        let c = f.oob_c_index(&t, &y).unwrap();
        assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn low_memory_blocks_function_prediction() {
        let (t, y) = toy();
        let p = ForestParams {
            n_estimators: 3,
            low_memory: true,
            ..Default::default()
        };
        let f = fit_forest(&t, &y, &p, &feats(), 1).unwrap();
        assert_eq!(f.predict_survival(&t.row(0)), Err(Error::LowMemory));
        assert_eq!(f.predict_cumulative_hazard(&t.row(0)), Err(Error::LowMemory));
        assert!(f.predict_risk(&t).is_ok());
        let full = fit_forest(&t, &y, &ForestParams { low_memory: false, ..p }, &feats(), 1).unwrap();
        let s = full.predict_survival(&t.row(0)).unwrap();
        assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn serialized_forest_round_trips() {
        let (t, y) = toy();
        let p = ForestParams {
            n_estimators: 4,
            ..Default::default()
        };
        let f = fit_forest(&t, &y, &p, &feats(), 9).unwrap();
        let back = Forest::<f64>::from_json(&f.to_json()).unwrap();
        assert_eq!(back.to_json(), f.to_json());
        assert_eq!(back.risk_rule(), RISK_RULE);
    }
}
