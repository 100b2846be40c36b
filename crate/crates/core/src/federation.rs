//! Tree-level federation: pool local forests, filter trees by feature
//! compatibility per target site, and integrate them under an update strategy.
//!
//! Only trees move between sites. A tree is usable at a site when every
//! feature it splits on is available (non-stub) there.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{forest_risk, Forest};
use crate::scalar::Scalar;
use crate::seeding;
use crate::table::Table;
use crate::tree::SurvivalTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMethod {
    /// Keep every compatible remote tree.
    #[default]
    All,
    /// Sample back down to `n_estimators` from local + received trees.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateWeighting {
    #[default]
    Equal,
    /// Weight each tree by its originating site's training set size.
    SiteSize,
}

impl FromStr for UpdateMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Self::All),
            "constant" => Ok(Self::Constant),
            other => Err(Error::InvalidParam(format!("unknown update method `{other}`"))),
        }
    }
}

impl FromStr for UpdateWeighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(Self::Equal),
            "site_size" => Ok(Self::SiteSize),
            other => Err(Error::InvalidParam(format!("unknown update weighting `{other}`"))),
        }
    }
}

impl fmt::Display for UpdateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::All => "all",
            Self::Constant => "constant",
        })
    }
}

impl fmt::Display for UpdateWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Equal => "equal",
            Self::SiteSize => "site_size",
        })
    }
}

/// Features with no missing value in a site's aligned table.
pub fn site_features<S: Scalar>(aligned: &Table<S>) -> BTreeSet<String> {
    aligned.complete_columns().into_iter().collect()
}

/// Which trees of (local ++ received) end up in the active set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Selection {
    /// Indices into the local forest's trees, ascending.
    pub local: Vec<usize>,
    /// Indices into the received list, ascending.
    pub received: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel<S> {
    forest: Forest<S>,
    site_id: String,
    site_features: BTreeSet<String>,
    train_size: usize,
    update_method: UpdateMethod,
    update_weighting: UpdateWeighting,
    federated_trees: Vec<Arc<SurvivalTree<S>>>,
    active_set: Vec<Arc<SurvivalTree<S>>>,
}

impl<S: Scalar> LocalModel<S> {
    /// Wraps a fitted forest; its trees are stamped with `site_id`.
    pub fn new(
        mut forest: Forest<S>,
        site_id: impl Into<String>,
        site_features: BTreeSet<String>,
        update_method: UpdateMethod,
        update_weighting: UpdateWeighting,
    ) -> Result<Self> {
        let site_id = site_id.into();
        forest.set_origin_site(&site_id);
        for t in forest.trees() {
            if let Some(f) = t.first_missing_feature(&site_features) {
                return Err(Error::IncompatibleTree {
                    site: site_id.clone(),
                    target: site_id.clone(),
                    feature: f.to_string(),
                });
            }
        }
        Ok(Self {
            train_size: forest.train_size(),
            active_set: forest.trees().to_vec(),
            forest,
            site_id,
            site_features,
            update_method,
            update_weighting,
            federated_trees: Vec::new(),
        })
    }

    pub fn forest(&self) -> &Forest<S> {
        &self.forest
    }

    pub fn site_id(&self) -> &str {
        &self.site_id
    }

    pub fn site_features(&self) -> &BTreeSet<String> {
        &self.site_features
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    pub fn update_method(&self) -> UpdateMethod {
        self.update_method
    }

    pub fn update_weighting(&self) -> UpdateWeighting {
        self.update_weighting
    }

    pub fn federated_trees(&self) -> &[Arc<SurvivalTree<S>>] {
        &self.federated_trees
    }

    pub fn active_set(&self) -> &[Arc<SurvivalTree<S>>] {
        &self.active_set
    }

    pub fn n_estimators(&self) -> usize {
        self.forest.params().n_estimators
    }

    pub fn predict_risk(&self, table: &Table<S>) -> Result<Vec<S>> {
        forest_risk(&self.active_set, table)
    }

    /// Canonical document of the active set, one tree document per element.
    pub fn active_set_json(&self) -> String {
        serde_json::to_string(&self.active_set).expect("tree serialization is infallible")
    }

    fn check_received(&self, received: &[Arc<SurvivalTree<S>>]) -> Result<()> {
        for t in received {
            if let Some(f) = t.first_missing_feature(&self.site_features) {
                return Err(Error::IncompatibleTree {
                    site: t.origin_site().to_string(),
                    target: self.site_id.clone(),
                    feature: f.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Decides which local and received trees form the active set.
    pub fn select<R: Rng + ?Sized>(&self, received: &[Arc<SurvivalTree<S>>], rng: &mut R) -> Result<Selection> {
        self.check_received(received)?;
        let n_local = self.forest.trees().len();
        match self.update_method {
            UpdateMethod::All => Ok(Selection {
                local: (0..n_local).collect(),
                received: (0..received.len()).collect(),
            }),
            UpdateMethod::Constant => {
                let weights: Vec<f64> = self
                    .forest
                    .trees()
                    .iter()
                    .chain(received)
                    .map(|t| match self.update_weighting {
                        UpdateWeighting::Equal => 1.0,
                        UpdateWeighting::SiteSize => t.train_size() as f64,
                    })
                    .collect();
                let picked = weighted_sample_without_replacement(&weights, self.n_estimators(), rng)?;
                let (local, received): (Vec<usize>, Vec<usize>) = picked.into_iter().partition(|&i| i < n_local);
                Ok(Selection {
                    local,
                    received: received.into_iter().map(|i| i - n_local).collect(),
                })
            }
        }
    }

    /// Installs `received` as the federated trees and builds the active set
    /// from `selection`.
    pub fn apply(mut self, received: Vec<Arc<SurvivalTree<S>>>, selection: &Selection) -> Result<Self> {
        self.check_received(&received)?;
        let local = self.forest.trees();
        let out_of_range = selection.local.iter().any(|&i| i >= local.len())
            || selection.received.iter().any(|&i| i >= received.len());
        if out_of_range {
            return Err(Error::InvalidParam("selection index out of range".into()));
        }
        self.active_set = selection
            .local
            .iter()
            .map(|&i| Arc::clone(&local[i]))
            .chain(selection.received.iter().map(|&i| Arc::clone(&received[i])))
            .collect();
        self.federated_trees = received;
        Ok(self)
    }

    pub fn integrate<R: Rng + ?Sized>(self, received: Vec<Arc<SurvivalTree<S>>>, rng: &mut R) -> Result<Self> {
        let selection = self.select(&received, rng)?;
        self.apply(received, &selection)
    }
}

/// Exponential-keys sampling: key = ln(u) / w, keep the `n` largest.
/// Returns ascending indices; the whole population when `n >= len`.
pub fn weighted_sample_without_replacement<R: Rng + ?Sized>(
    weights: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidParam(format!("sampling weight {w} must be positive")));
    }
    if n >= weights.len() {
        return Ok((0..weights.len()).collect());
    }
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.random();
            (u.ln() / w, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut picked: Vec<usize> = keyed[..n].iter().map(|&(_, i)| i).collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Every tree from every site, with provenance. Holds model artifacts only.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedPool<S> {
    pub trees: Vec<Arc<SurvivalTree<S>>>,
    pub site_features: BTreeMap<String, BTreeSet<String>>,
    pub site_sizes: BTreeMap<String, usize>,
    pub feature_order: Vec<String>,
}

pub fn pool_models<S: Scalar>(models: &[LocalModel<S>]) -> Result<FederatedPool<S>> {
    let first = models
        .first()
        .ok_or_else(|| Error::InvalidParam("no models to pool".into()))?;
    let mut pool = FederatedPool {
        trees: Vec::new(),
        site_features: BTreeMap::new(),
        site_sizes: BTreeMap::new(),
        feature_order: first.forest.feature_order().to_vec(),
    };
    for m in models {
        if m.forest.feature_order() != pool.feature_order {
            return Err(Error::UnalignedModels(first.site_id.clone(), m.site_id.clone()));
        }
        if pool
            .site_features
            .insert(m.site_id.clone(), m.site_features.clone())
            .is_some()
        {
            return Err(Error::InvalidParam(format!("duplicate site `{}`", m.site_id)));
        }
        pool.site_sizes.insert(m.site_id.clone(), m.train_size);
        pool.trees.extend(m.forest.trees().iter().cloned());
    }
    Ok(pool)
}

/// Trees from other sites whose split features the target site holds.
pub fn compatible_trees<S: Scalar>(pool: &FederatedPool<S>, target: &str) -> Result<Vec<Arc<SurvivalTree<S>>>> {
    let features = pool
        .site_features
        .get(target)
        .ok_or_else(|| Error::UnknownClient(target.to_string()))?;
    Ok(pool
        .trees
        .iter()
        .filter(|t| t.origin_site() != target && t.is_compatible_with(features))
        .cloned()
        .collect())
}

/// Per-site outcome of a federation round, before it is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SitePlan<S> {
    pub received: Vec<Arc<SurvivalTree<S>>>,
    pub selection: Selection,
}

/// Computes every site's received trees and active-set selection. Each site
/// samples from its own stream of `seed`, keyed by its id.
pub fn plan_federation<S: Scalar>(models: &[LocalModel<S>], seed: u64) -> Result<BTreeMap<String, SitePlan<S>>> {
    let pool = pool_models(models)?;
    models
        .iter()
        .map(|m| {
            let received = compatible_trees(&pool, &m.site_id)?;
            let mut rng = seeding::stream(seed, seeding::label(&m.site_id));
            let selection = m.select(&received, &mut rng)?;
            Ok((m.site_id.clone(), SitePlan { received, selection }))
        })
        .collect()
}

/// Pools, filters and integrates in one call.
pub fn federate<S: Scalar>(models: Vec<LocalModel<S>>, seed: u64) -> Result<BTreeMap<String, LocalModel<S>>> {
    let mut plans = plan_federation(&models, seed)?;
    models
        .into_iter()
        .map(|m| {
            let plan = plans.remove(&m.site_id).expect("plan exists for every model");
            let id = m.site_id.clone();
            Ok((id, m.apply(plan.received, &plan.selection)?))
        })
        .collect()
}
