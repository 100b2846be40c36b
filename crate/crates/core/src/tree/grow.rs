//! Recursive tree construction with exhaustive midpoint thresholds.
//!
//! A bootstrap multiset is grown as distinct rows carrying their draw counts
//! as weights: `min_samples_split` and `min_samples_leaf` count distinct
//! rows, while the log-rank statistic and leaf estimates use the weights.

use rand::seq::index;
use rand::Rng;

use super::{Leaf, Node, SurvivalTree, TreeParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::survival::{
    build_risk_table, cmp_scalar, kaplan_meier_from_table, nelson_aalen_from_table, LogRankAccumulator, Outcome,
};
use crate::table::Table;

/// Fits a tree on every row of `table`.
pub fn fit_tree<S: Scalar, R: Rng + ?Sized>(
    table: &Table<S>,
    outcomes: &[Outcome<S>],
    params: &TreeParams,
    available_features: &[String],
    rng: &mut R,
) -> Result<SurvivalTree<S>> {
    let samples: Vec<usize> = (0..table.n_rows()).collect();
    fit_tree_on_samples(table, outcomes, params, available_features, samples, rng)
}

/// Fits a tree on the row multiset `samples` (bootstrap draws may repeat rows).
pub fn fit_tree_on_samples<S: Scalar, R: Rng + ?Sized>(
    table: &Table<S>,
    outcomes: &[Outcome<S>],
    params: &TreeParams,
    available_features: &[String],
    samples: Vec<usize>,
    rng: &mut R,
) -> Result<SurvivalTree<S>> {
    params.validate()?;
    if table.n_rows() != outcomes.len() {
        return Err(Error::LengthMismatch {
            what: "feature rows vs outcomes",
            left: table.n_rows(),
            right: outcomes.len(),
        });
    }
    if available_features.is_empty() {
        return Err(Error::NoUsableFeatures);
    }
    if samples.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let mut columns = Vec::with_capacity(available_features.len());
    for name in available_features {
        let col = table
            .column(name)
            .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
        if col.iter().any(|v| v.is_nan()) {
            return Err(Error::PartialMissing(name.clone()));
        }
        columns.push(col);
    }

    let mut weights = vec![0usize; table.n_rows()];
    for &i in &samples {
        let w = weights
            .get_mut(i)
            .ok_or_else(|| Error::InvalidParam(format!("sample index {i} out of range")))?;
        *w += 1;
    }
    let mut rows: Vec<usize> = (0..table.n_rows()).filter(|&i| weights[i] > 0).collect();

    let mut grower = Grower {
        columns,
        names: available_features,
        outcomes,
        weights: &weights,
        params,
        n_candidates: params.max_features.resolve(available_features.len()),
        nodes: Vec::new(),
        scratch: Scratch::default(),
    };
    grower.grow(&mut rows, 0, rng)?;
    SurvivalTree::from_nodes(grower.nodes, String::new(), samples.len())
}

#[derive(Default)]
struct Scratch {
    order: Vec<usize>,
    at_risk_left: Vec<usize>,
    events_left: Vec<usize>,
}

struct Grower<'a, S> {
    columns: Vec<&'a [S]>,
    names: &'a [String],
    outcomes: &'a [Outcome<S>],
    /// Draw count per table row.
    weights: &'a [usize],
    params: &'a TreeParams,
    n_candidates: usize,
    nodes: Vec<Node<S>>,
    scratch: Scratch,
}

struct BestSplit<S> {
    feature: usize,
    threshold: S,
    statistic: S,
}

/// Event-time grid of a node with per-row positions on it.
struct NodeGrid {
    /// Weighted totals per grid time: at risk, events.
    at_risk: Vec<usize>,
    events: Vec<usize>,
    /// Number of grid times `<=` the row's time (it is at risk at these).
    risk_span: Vec<usize>,
    /// Grid index of the row's own event, if it had one.
    event_slot: Vec<Option<usize>>,
}

impl<'a, S: Scalar> Grower<'a, S> {
    fn grow<R: Rng + ?Sized>(&mut self, rows: &mut [usize], depth: usize, rng: &mut R) -> Result<usize> {
        let id = self.nodes.len();
        let split = if self.should_stop(rows, depth) {
            None
        } else {
            self.best_split(rows, rng)
        };
        let Some(best) = split else {
            self.nodes.push(Node::Leaf(self.leaf(rows)?));
            return Ok(id);
        };

        let col = self.columns[best.feature];
        let mid = partition_in_place(rows, |&i| col[i] <= best.threshold);
        // reserve the slot; children are filled in depth-first
        self.nodes.push(Node::Leaf(Leaf {
            times: Vec::new(),
            chf: Vec::new(),
            surv: None,
            n_samples: 0,
        }));
        let (left_rows, right_rows) = rows.split_at_mut(mid);
        let left = self.grow(left_rows, depth + 1, rng)?;
        let right = self.grow(right_rows, depth + 1, rng)?;
        self.nodes[id] = Node::Internal {
            feature: self.names[best.feature].clone(),
            threshold: best.threshold,
            left,
            right,
        };
        Ok(id)
    }

    fn should_stop(&self, rows: &[usize], depth: usize) -> bool {
        if rows.len() < self.params.min_samples_split {
            return true;
        }
        if self.params.max_depth.is_some_and(|d| depth >= d) {
            return true;
        }
        let first = self.outcomes[rows[0]];
        rows.iter().all(|&i| self.outcomes[i] == first)
    }

    fn leaf(&self, rows: &[usize]) -> Result<Leaf<S>> {
        let outs: Vec<Outcome<S>> = rows
            .iter()
            .flat_map(|&i| std::iter::repeat_n(self.outcomes[i], self.weights[i]))
            .collect();
        let table = build_risk_table(&outs)?;
        let chf = nelson_aalen_from_table(&table);
        let surv = kaplan_meier_from_table(&table);
        Ok(Leaf {
            times: chf.times,
            chf: chf.values,
            surv: Some(surv.values),
            n_samples: outs.len(),
        })
    }

    fn node_grid(&self, rows: &[usize]) -> NodeGrid {
        let mut grid: Vec<S> = rows
            .iter()
            .map(|&i| self.outcomes[i])
            .filter(|o| o.event)
            .map(|o| o.time)
            .collect();
        grid.sort_by(cmp_scalar);
        grid.dedup();

        let mut at_risk = vec![0usize; grid.len()];
        let mut events = vec![0usize; grid.len()];
        let mut risk_span = Vec::with_capacity(rows.len());
        let mut event_slot = Vec::with_capacity(rows.len());
        let mut span_weight = vec![0usize; grid.len() + 1];
        for &i in rows {
            let (o, w) = (self.outcomes[i], self.weights[i]);
            let span = grid.partition_point(|&t| t <= o.time);
            span_weight[span] += w;
            risk_span.push(span);
            let slot = o.event.then(|| span - 1);
            if let Some(s) = slot {
                events[s] += w;
            }
            event_slot.push(slot);
        }
        // at_risk[k] = weight of rows whose span exceeds k
        let mut running = 0;
        for k in (0..grid.len()).rev() {
            running += span_weight[k + 1];
            at_risk[k] = running;
        }
        NodeGrid {
            at_risk,
            events,
            risk_span,
            event_slot,
        }
    }

    fn best_split<R: Rng + ?Sized>(&mut self, rows: &[usize], rng: &mut R) -> Option<BestSplit<S>> {
        let grid = self.node_grid(rows);
        if grid.at_risk.is_empty() {
            return None;
        }
        let mut candidates = index::sample(rng, self.columns.len(), self.n_candidates).into_vec();
        candidates.sort_unstable();

        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf;
        let n_times = grid.at_risk.len();
        let mut best: Option<BestSplit<S>> = None;
        let scratch = &mut self.scratch;

        for f in candidates {
            let col = self.columns[f];
            // positions into `rows`, sorted by feature value
            scratch.order.clear();
            scratch.order.extend(0..n);
            scratch.order.sort_by(|&a, &b| cmp_scalar(&col[rows[a]], &col[rows[b]]));
            scratch.at_risk_left.clear();
            scratch.at_risk_left.resize(n_times, 0);
            scratch.events_left.clear();
            scratch.events_left.resize(n_times, 0);

            for k in 0..n - 1 {
                let pos = scratch.order[k];
                let w = self.weights[rows[pos]];
                for y in &mut scratch.at_risk_left[..grid.risk_span[pos]] {
                    *y += w;
                }
                if let Some(s) = grid.event_slot[pos] {
                    scratch.events_left[s] += w;
                }
                let n_left = k + 1;
                if n_left < min_leaf {
                    continue;
                }
                if n - n_left < min_leaf {
                    break;
                }
                let lo = col[rows[pos]];
                let hi = col[rows[scratch.order[k + 1]]];
                if lo == hi {
                    continue;
                }
                let mut acc = LogRankAccumulator::new();
                for t in 0..n_times {
                    acc.push(
                        scratch.at_risk_left[t],
                        scratch.events_left[t],
                        grid.at_risk[t],
                        grid.events[t],
                    );
                }
                let statistic = acc.finish();
                if best.as_ref().is_none_or(|b| statistic > b.statistic) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: midpoint(lo, hi),
                        statistic,
                    });
                }
            }
        }
        best.filter(|b| b.statistic > S::zero())
    }
}

/// Midpoint of `lo < hi`, kept strictly below `hi` so `lo` routes left.
fn midpoint<S: Scalar>(lo: S, hi: S) -> S {
    let m = lo + (hi - lo) / S::lit(2.0);
    if m < hi {
        m
    } else {
        lo
    }
}

/// Stable partition; returns the number of elements satisfying `pred`.
fn partition_in_place(rows: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|i| pred(i));
    let mid = left.len();
    rows[..mid].copy_from_slice(&left);
    rows[mid..].copy_from_slice(&right);
    mid
}
