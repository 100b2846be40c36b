//! Brute-force reference implementations, written for clarity over speed.
#![allow(dead_code)]

use fedsurv_core::survival::Outcome;
use rand::Rng;

pub type O = Outcome<f64>;

fn event_times(outcomes: &[O]) -> Vec<f64> {
    let mut t: Vec<f64> = outcomes.iter().filter(|o| o.event).map(|o| o.time).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn at_risk(outcomes: &[O], t: f64) -> usize {
    outcomes.iter().filter(|o| o.time >= t).count()
}

fn deaths(outcomes: &[O], t: f64) -> usize {
    outcomes.iter().filter(|o| o.event && o.time == t).count()
}

/// (event times, S at each) by the product-limit definition.
pub fn kaplan_meier(outcomes: &[O]) -> (Vec<f64>, Vec<f64>) {
    let times = event_times(outcomes);
    let values = times
        .iter()
        .map(|&t| {
            times
                .iter()
                .filter(|&&u| u <= t)
                .map(|&u| 1.0 - deaths(outcomes, u) as f64 / at_risk(outcomes, u) as f64)
                .product()
        })
        .collect();
    (times, values)
}

/// (event times, H at each) as a sum of hazard increments.
pub fn nelson_aalen(outcomes: &[O]) -> (Vec<f64>, Vec<f64>) {
    let times = event_times(outcomes);
    let values = times
        .iter()
        .map(|&t| {
            times
                .iter()
                .filter(|&&u| u <= t)
                .map(|&u| deaths(outcomes, u) as f64 / at_risk(outcomes, u) as f64)
                .sum()
        })
        .collect();
    (times, values)
}

/// Standardized two-sample log-rank statistic with the hypergeometric variance.
pub fn logrank(left: &[O], right: &[O]) -> f64 {
    let pooled: Vec<O> = left.iter().chain(right).copied().collect();
    let (mut o_minus_e, mut var) = (0.0, 0.0);
    for t in event_times(&pooled) {
        let y = at_risk(&pooled, t) as f64;
        let d = deaths(&pooled, t) as f64;
        let yl = at_risk(left, t) as f64;
        let dl = deaths(left, t) as f64;
        o_minus_e += dl - yl * d / y;
        if y > 1.0 {
            var += yl * (y - yl) * d * (y - d) / (y * y * (y - 1.0));
        }
    }
    if var > 0.0 {
        o_minus_e.abs() / var.sqrt()
    } else {
        0.0
    }
}

/// Harrell's C over all ordered pairs; `None` without comparable pairs.
pub fn c_index(risk: &[f64], outcomes: &[O]) -> Option<f64> {
    let (mut pairs, mut score) = (0usize, 0.0);
    for i in 0..outcomes.len() {
        for j in 0..outcomes.len() {
            let (a, b) = (outcomes[i], outcomes[j]);
            let comparable = a.event && (a.time < b.time || (a.time == b.time && !b.event));
            if i == j || !comparable {
                continue;
            }
            pairs += 1;
            if risk[i] > risk[j] {
                score += 1.0;
            } else if risk[i] == risk[j] {
                score += 0.5;
            }
        }
    }
    (pairs > 0).then(|| score / pairs as f64)
}

/// Sum of a Nelson-Aalen step function over `grid`.
pub fn chf_sum(times: &[f64], chf: &[f64], grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&g| {
            times
                .iter()
                .zip(chf)
                .filter(|(t, _)| **t <= g)
                .map(|(_, h)| *h)
                .next_back()
                .unwrap_or(0.0)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSplit {
    pub feature: usize,
    pub threshold: f64,
    pub statistic: f64,
}

/// Every admissible midpoint split of `columns`, in scan order
/// (feature, then threshold).
pub fn candidate_splits(columns: &[Vec<f64>], outcomes: &[O], min_leaf: usize) -> Vec<RootSplit> {
    let mut out = Vec::new();
    for (f, col) in columns.iter().enumerate() {
        let mut values = col.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let threshold = w[0] + (w[1] - w[0]) / 2.0;
            let (l, r): (Vec<O>, Vec<O>) = {
                let mut l = Vec::new();
                let mut r = Vec::new();
                for (x, o) in col.iter().zip(outcomes) {
                    if *x <= threshold {
                        l.push(*o);
                    } else {
                        r.push(*o);
                    }
                }
                (l, r)
            };
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            out.push(RootSplit {
                feature: f,
                threshold,
                statistic: logrank(&l, &r),
            });
        }
    }
    out
}

/// Random censored sample of size `n`. Times come from a small grid half of
/// the time so ties of every kind appear.
pub fn random_outcomes<R: Rng>(rng: &mut R, n: usize) -> Vec<O> {
    let coarse = rng.random_bool(0.5);
    (0..n)
        .map(|_| {
            let time = if coarse {
                f64::from(rng.random_range(1..=12u32))
            } else {
                rng.random_range(0.01..100.0)
            };
            Outcome::new(time, rng.random_bool(0.6)).unwrap()
        })
        .collect()
}

/// Risk scores with occasional ties.
pub fn random_risk<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let coarse = rng.random_bool(0.3);
    (0..n)
        .map(|_| {
            if coarse {
                f64::from(rng.random_range(0..5u32))
            } else {
                rng.random_range(-3.0..3.0)
            }
        })
        .collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
