//! Survival trees: log-rank splitting, Nelson-Aalen / Kaplan-Meier leaves.

mod doc;
mod grow;
mod params;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::survival::{cmp_scalar, StepFunction};
use crate::table::{FeatureLookup, Table};

pub use grow::{fit_tree, fit_tree_on_samples};
pub use params::{MaxFeatures, TreeParams};

/// Leaf estimate over the event-time grid of the node's training samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf<S> {
    pub times: Vec<S>,
    pub chf: Vec<S>,
    /// Dropped in low-memory forests.
    pub surv: Option<Vec<S>>,
    pub n_samples: usize,
}

impl<S: Scalar> Leaf<S> {
    /// Sum of this leaf's cumulative hazard step function over `grid`, which
    /// must be sorted and contain every leaf time.
    pub fn chf_sum_over(&self, grid: &[S]) -> S {
        let mut j = 0;
        let mut acc = S::zero();
        for &g in grid {
            while j < self.times.len() && self.times[j] <= g {
                j += 1;
            }
            if j > 0 {
                acc = acc + self.chf[j - 1];
            }
        }
        acc
    }

    pub fn chf_function(&self) -> StepFunction<S> {
        StepFunction {
            times: self.times.clone(),
            values: self.chf.clone(),
            value_before_first: S::zero(),
        }
    }

    pub fn survival_function(&self) -> Result<StepFunction<S>> {
        let surv = self.surv.as_ref().ok_or(Error::LowMemory)?;
        Ok(StepFunction {
            times: self.times.clone(),
            values: surv.clone(),
            value_before_first: S::one(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node<S> {
    /// Rows with `value <= threshold` go left.
    Internal {
        feature: String,
        threshold: S,
        left: usize,
        right: usize,
    },
    Leaf(Leaf<S>),
}

/// A fitted survival tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTree<S> {
    nodes: Vec<Node<S>>,
    split_features: BTreeSet<String>,
    origin_site: String,
    train_size: usize,
    /// Union of all leaf times: the event times of the tree's training sample.
    grid: Vec<S>,
    /// Per node; zero at internal nodes.
    leaf_risk: Vec<S>,
}

impl<S: Scalar> SurvivalTree<S> {
    /// Assembles a tree from a node list, validating its structure.
    pub fn from_nodes(nodes: Vec<Node<S>>, origin_site: impl Into<String>, train_size: usize) -> Result<Self> {
        doc::validate_nodes(&nodes)?;
        let split_features = nodes
            .iter()
            .filter_map(|n| match n {
                Node::Internal { feature, .. } => Some(feature.clone()),
                Node::Leaf(_) => None,
            })
            .collect();
        let mut grid: Vec<S> = nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf(l) => Some(l.times.iter().copied()),
                Node::Internal { .. } => None,
            })
            .flatten()
            .collect();
        grid.sort_by(cmp_scalar);
        grid.dedup();
        let leaf_risk = nodes
            .iter()
            .map(|n| match n {
                Node::Leaf(l) => l.chf_sum_over(&grid),
                Node::Internal { .. } => S::zero(),
            })
            .collect();
        Ok(Self {
            nodes,
            split_features,
            origin_site: origin_site.into(),
            train_size,
            grid,
            leaf_risk,
        })
    }

    /// Event-time grid of the training sample, recovered from the leaves.
    pub fn grid(&self) -> &[S] {
        &self.grid
    }

    pub fn nodes(&self) -> &[Node<S>] {
        &self.nodes
    }

    pub fn split_features(&self) -> &BTreeSet<String> {
        &self.split_features
    }

    pub fn origin_site(&self) -> &str {
        &self.origin_site
    }

    pub fn set_origin_site(&mut self, site: impl Into<String>) {
        self.origin_site = site.into();
    }

    /// Training set size of the originating site.
    pub fn train_size(&self) -> usize {
        self.train_size
    }

    pub(crate) fn set_train_size(&mut self, n: usize) {
        self.train_size = n;
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().count()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Leaf<S>> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(l) => Some(l),
            Node::Internal { .. } => None,
        })
    }

    pub fn is_stump(&self) -> bool {
        self.split_features.is_empty()
    }

    /// True when every split feature belongs to `features`.
    pub fn is_compatible_with(&self, features: &BTreeSet<String>) -> bool {
        self.split_features.is_subset(features)
    }

    /// First split feature not in `features`, if any.
    pub fn first_missing_feature(&self, features: &BTreeSet<String>) -> Option<&str> {
        self.split_features
            .iter()
            .find(|f| !features.contains(*f))
            .map(String::as_str)
    }

    pub fn drop_survival(&mut self) {
        for n in &mut self.nodes {
            if let Node::Leaf(l) = n {
                l.surv = None;
            }
        }
    }

    fn incompatible(&self, feature: &str) -> Error {
        Error::IncompatibleRow {
            site: self.origin_site.clone(),
            feature: feature.to_string(),
        }
    }

    fn route<L: FeatureLookup<S> + ?Sized>(&self, row: &L) -> Result<usize> {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf(_) => return Ok(idx),
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = row
                        .feature(feature)
                        .filter(|v| !v.is_nan())
                        .ok_or_else(|| self.incompatible(feature))?;
                    idx = if v <= *threshold { *left } else { *right };
                }
            }
        }
    }

    fn leaf_at(&self, idx: usize) -> &Leaf<S> {
        match &self.nodes[idx] {
            Node::Leaf(l) => l,
            Node::Internal { .. } => unreachable!("routing ends at a leaf"),
        }
    }

    /// Routes a row to its leaf.
    pub fn leaf_for<L: FeatureLookup<S> + ?Sized>(&self, row: &L) -> Result<&Leaf<S>> {
        self.route(row).map(|i| self.leaf_at(i))
    }

    /// Risk score: the routed leaf's cumulative hazard summed over the
    /// tree's event-time grid.
    pub fn risk<L: FeatureLookup<S> + ?Sized>(&self, row: &L) -> Result<S> {
        self.route(row).map(|i| self.leaf_risk[i])
    }

    pub fn chf<L: FeatureLookup<S> + ?Sized>(&self, row: &L) -> Result<StepFunction<S>> {
        self.leaf_for(row).map(Leaf::chf_function)
    }

    pub fn survival<L: FeatureLookup<S> + ?Sized>(&self, row: &L) -> Result<StepFunction<S>> {
        self.leaf_for(row)?.survival_function()
    }

    /// Leaf node index of every row of `table`. Split features are resolved
    /// to column positions once.
    pub fn route_table(&self, table: &Table<S>) -> Result<Vec<usize>> {
        let cols = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Internal { feature, .. } => table
                    .column_index(feature)
                    .ok_or_else(|| self.incompatible(feature)),
                Node::Leaf(_) => Ok(usize::MAX),
            })
            .collect::<Result<Vec<_>>>()?;
        (0..table.n_rows())
            .map(|r| {
                let mut idx = 0;
                loop {
                    match &self.nodes[idx] {
                        Node::Leaf(_) => return Ok(idx),
                        Node::Internal {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            let v = table.value(r, cols[idx]);
                            if v.is_nan() {
                                return Err(self.incompatible(feature));
                            }
                            idx = if v <= *threshold { *left } else { *right };
                        }
                    }
                }
            })
            .collect()
    }

    pub fn leaves_for_table(&self, table: &Table<S>) -> Result<Vec<&Leaf<S>>> {
        Ok(self.route_table(table)?.into_iter().map(|i| self.leaf_at(i)).collect())
    }

    pub fn risk_for_table(&self, table: &Table<S>) -> Result<Vec<S>> {
        Ok(self.route_table(table)?.into_iter().map(|i| self.leaf_risk[i]).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidTree(e.to_string()))
    }
}
