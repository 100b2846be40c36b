//! Censoring-aware estimators: risk tables, Kaplan-Meier, Nelson-Aalen,
//! the two-sample log-rank statistic and Harrell's concordance index.
//!
//! Ties between an event and a censoring at the same time count the censored
//! subject as still at risk. Time ties are detected with exact equality.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Observed time plus event indicator (`false` = right-censored).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome<S> {
    pub time: S,
    pub event: bool,
}

impl<S: Scalar> Outcome<S> {
    pub fn new(time: S, event: bool) -> Result<Self> {
        if !(time.is_finite() && time > S::zero()) {
            return Err(Error::InvalidTime(format!("{time}")));
        }
        Ok(Self { time, event })
    }
}

/// Counts at every distinct event time.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable<S> {
    pub event_times: Vec<S>,
    /// Subjects with `time >= event_times[i]`.
    pub at_risk: Vec<usize>,
    /// Events at exactly `event_times[i]`.
    pub events: Vec<usize>,
}

impl<S> RiskTable<S> {
    pub fn len(&self) -> usize {
        self.event_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.event_times.is_empty()
    }
}

/// Right-continuous step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction<S> {
    pub times: Vec<S>,
    pub values: Vec<S>,
    pub value_before_first: S,
}

impl<S: Scalar> StepFunction<S> {
    pub fn constant(value: S) -> Self {
        Self {
            times: Vec::new(),
            values: Vec::new(),
            value_before_first: value,
        }
    }

    /// Value at `t`: the last step at or before `t`.
    pub fn eval(&self, t: S) -> S {
        let idx = self.times.partition_point(|&x| x <= t);
        if idx == 0 {
            self.value_before_first
        } else {
            self.values[idx - 1]
        }
    }
}

pub(crate) fn cmp_scalar<S: Scalar>(a: &S, b: &S) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

pub fn build_risk_table<S: Scalar>(outcomes: &[Outcome<S>]) -> Result<RiskTable<S>> {
    if outcomes.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let mut sorted: Vec<&Outcome<S>> = outcomes.iter().collect();
    sorted.sort_by(|a, b| cmp_scalar(&a.time, &b.time));

    let n = sorted.len();
    let mut table = RiskTable {
        event_times: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
    };
    let mut start = 0;
    while start < n {
        let t = sorted[start].time;
        let mut end = start;
        let mut d = 0;
        while end < n && sorted[end].time == t {
            d += usize::from(sorted[end].event);
            end += 1;
        }
        if d > 0 {
            table.event_times.push(t);
            table.at_risk.push(n - start);
            table.events.push(d);
        }
        start = end;
    }
    Ok(table)
}

/// Product-limit survival estimate S(t).
pub fn kaplan_meier<S: Scalar>(outcomes: &[Outcome<S>]) -> Result<StepFunction<S>> {
    Ok(kaplan_meier_from_table(&build_risk_table(outcomes)?))
}

pub fn kaplan_meier_from_table<S: Scalar>(table: &RiskTable<S>) -> StepFunction<S> {
    let mut s = S::one();
    let values = table
        .at_risk
        .iter()
        .zip(&table.events)
        .map(|(&y, &d)| {
            s = s * (S::one() - S::from_count(d) / S::from_count(y));
            s
        })
        .collect();
    StepFunction {
        times: table.event_times.clone(),
        values,
        value_before_first: S::one(),
    }
}

/// Nelson-Aalen cumulative hazard estimate H(t).
pub fn nelson_aalen<S: Scalar>(outcomes: &[Outcome<S>]) -> Result<StepFunction<S>> {
    Ok(nelson_aalen_from_table(&build_risk_table(outcomes)?))
}

pub fn nelson_aalen_from_table<S: Scalar>(table: &RiskTable<S>) -> StepFunction<S> {
    let mut h = S::zero();
    let values = table
        .at_risk
        .iter()
        .zip(&table.events)
        .map(|(&y, &d)| {
            h = h + S::from_count(d) / S::from_count(y);
            h
        })
        .collect();
    StepFunction {
        times: table.event_times.clone(),
        values,
        value_before_first: S::zero(),
    }
}

/// Accumulates the standardized log-rank statistic one event time at a time.
///
/// Shared by [`logrank_statistic`] and the tree split scanner so both produce
/// bit-identical values for the same partition.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogRankAccumulator<S> {
    numerator: S,
    variance: S,
}

impl<S: Scalar> LogRankAccumulator<S> {
    pub(crate) fn new() -> Self {
        Self {
            numerator: S::zero(),
            variance: S::zero(),
        }
    }

    /// Adds one event time with `at_risk_left`/`events_left` of the totals
    /// `at_risk`/`events`.
    #[inline]
    pub(crate) fn push(&mut self, at_risk_left: usize, events_left: usize, at_risk: usize, events: usize) {
        let yl = S::from_count(at_risk_left);
        let y = S::from_count(at_risk);
        let d = S::from_count(events);
        let frac = yl / y;
        self.numerator = self.numerator + (S::from_count(events_left) - frac * d);
        if at_risk > 1 {
            let spread = (y - d) / (y - S::one());
            self.variance = self.variance + frac * (S::one() - frac) * spread * d;
        }
    }

    pub(crate) fn finish(self) -> S {
        if self.variance > S::zero() {
            self.numerator.abs() / self.variance.sqrt()
        } else {
            S::zero()
        }
    }
}

/// Two-sample log-rank statistic |N| / sqrt(V) over the pooled event times.
pub fn logrank_statistic<S: Scalar>(left: &[Outcome<S>], right: &[Outcome<S>]) -> Result<S> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::DegenerateSplit);
    }
    let mut pooled: Vec<(S, bool, bool)> = left
        .iter()
        .map(|o| (o.time, o.event, true))
        .chain(right.iter().map(|o| (o.time, o.event, false)))
        .collect();
    pooled.sort_by(|a, b| cmp_scalar(&a.0, &b.0));

    let n = pooled.len();
    let mut at_risk_left = left.len();
    let mut acc = LogRankAccumulator::new();
    let mut start = 0;
    while start < n {
        let t = pooled[start].0;
        let (mut end, mut d, mut dl, mut nl) = (start, 0, 0, 0);
        while end < n && pooled[end].0 == t {
            let (_, event, is_left) = pooled[end];
            d += usize::from(event);
            dl += usize::from(event && is_left);
            nl += usize::from(is_left);
            end += 1;
        }
        if d > 0 {
            acc.push(at_risk_left, dl, n - start, d);
        }
        at_risk_left -= nl;
        start = end;
    }
    Ok(acc.finish())
}

/// Harrell's concordance with its pair counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concordance<S> {
    pub c_index: S,
    pub comparable_pairs: usize,
    pub concordant: usize,
    pub tied_risk: usize,
}

/// Identifier of the pair rule used by [`concordance`].
pub const CONCORDANCE_RULE: &str = "harrell_event_before_or_tied_with_censored_half_credit_ties";

/// Harrell's C-index.
///
/// A pair is comparable when the shorter time is an event, or when both
/// times are equal and exactly one is an event. The event subject is expected
/// to carry the higher risk; tied risks score one half.
pub fn concordance<S: Scalar>(risk: &[S], outcomes: &[Outcome<S>]) -> Result<Concordance<S>> {
    if risk.len() != outcomes.len() {
        return Err(Error::LengthMismatch {
            what: "risk scores vs outcomes",
            left: risk.len(),
            right: outcomes.len(),
        });
    }
    if let Some(bad) = risk.iter().find(|r| !r.is_finite()) {
        return Err(Error::InvalidParam(format!("non-finite risk score {bad}")));
    }
    let (mut pairs, mut concordant, mut tied) = (0usize, 0usize, 0usize);
    for i in 0..outcomes.len() {
        for j in (i + 1)..outcomes.len() {
            let (a, b) = (&outcomes[i], &outcomes[j]);
            // (early, late) index pair with the event subject first
            let ordered = match cmp_scalar(&a.time, &b.time) {
                Ordering::Less if a.event => Some((i, j)),
                Ordering::Greater if b.event => Some((j, i)),
                Ordering::Equal if a.event != b.event => Some(if a.event { (i, j) } else { (j, i) }),
                _ => None,
            };
            if let Some((hi, lo)) = ordered {
                pairs += 1;
                match cmp_scalar(&risk[hi], &risk[lo]) {
                    Ordering::Greater => concordant += 1,
                    Ordering::Equal => tied += 1,
                    Ordering::Less => {}
                }
            }
        }
    }
    if pairs == 0 {
        return Err(Error::NoComparablePairs);
    }
    let score = S::from_count(concordant) + S::from_count(tied) * S::lit(0.5);
    Ok(Concordance {
        c_index: score / S::from_count(pairs),
        comparable_pairs: pairs,
        concordant,
        tied_risk: tied,
    })
}

pub fn concordance_index<S: Scalar>(risk: &[S], outcomes: &[Outcome<S>]) -> Result<S> {
    concordance(risk, outcomes).map(|c| c.c_index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(t: f64, e: bool) -> Outcome<f64> {
        Outcome::new(t, e).unwrap()
    }

    fn sample() -> Vec<Outcome<f64>> {
        vec![o(1.0, true), o(2.0, false), o(3.0, true)]
    }

    #[test]
    fn outcome_rejects_bad_times() {
        assert!(Outcome::new(0.0, true).is_err());
        assert!(Outcome::new(-1.0, false).is_err());
        assert!(Outcome::new(f64::INFINITY, true).is_err());
        assert!(Outcome::new(f64::NAN, true).is_err());
    }

    #[test]
    fn risk_table_hand_counts() {
        let t = build_risk_table(&sample()).unwrap();
        assert_eq!(t.event_times, vec![1.0, 3.0]);
        assert_eq!(t.at_risk, vec![3, 1]);
        assert_eq!(t.events, vec![1, 1]);

        let t = build_risk_table(&[o(1.0, false), o(2.0, false)]).unwrap();
        assert!(t.is_empty());

        let t = build_risk_table(&[o(5.0, true), o(5.0, true)]).unwrap();
        assert_eq!((t.event_times, t.at_risk, t.events), (vec![5.0], vec![2], vec![2]));

        assert_eq!(build_risk_table::<f64>(&[]), Err(Error::EmptyCohort));
    }

    #[test]
    fn censored_at_event_time_stays_at_risk() {
        let t = build_risk_table(&[o(2.0, true), o(2.0, false), o(3.0, true)]).unwrap();
        assert_eq!(t.at_risk, vec![3, 1]);
        assert_eq!(t.events, vec![1, 1]);
    }

    #[test]
    fn kaplan_meier_examples() {
        let km = kaplan_meier(&sample()).unwrap();
        assert!((km.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.eval(3.0), 0.0);
        assert_eq!(km.eval(0.5), 1.0);

        let km = kaplan_meier(&[o(1.0, false), o(2.0, false)]).unwrap();
        assert_eq!(km.eval(10.0), 1.0);

        let km = kaplan_meier(&[o(5.0, true)]).unwrap();
        assert_eq!(km.eval(4.999), 1.0);
        assert_eq!(km.eval(5.0), 0.0);
        assert!(kaplan_meier::<f64>(&[]).is_err());
    }

    #[test]
    fn nelson_aalen_examples() {
        let na = nelson_aalen(&sample()).unwrap();
        assert!((na.eval(1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((na.eval(3.0) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(na.eval(0.1), 0.0);

        let na = nelson_aalen(&[o(1.0, false), o(2.0, false)]).unwrap();
        assert_eq!(na.eval(100.0), 0.0);

        let na = nelson_aalen(&[o(5.0, true), o(5.0, true)]).unwrap();
        assert_eq!(na.eval(5.0), 1.0);
    }

    #[test]
    fn logrank_examples() {
        let s = sample();
        assert_eq!(logrank_statistic(&s, &s).unwrap(), 0.0);
        assert!((logrank_statistic(&[o(1.0, true)], &[o(2.0, true)]).unwrap() - 1.0).abs() < 1e-15);
        let c = [o(1.0, false), o(4.0, false)];
        assert_eq!(logrank_statistic(&c, &[o(2.0, false)]).unwrap(), 0.0);
        assert_eq!(logrank_statistic(&s, &[]), Err(Error::DegenerateSplit));
    }

    #[test]
    fn concordance_examples() {
        let out = [o(1.0, true), o(2.0, true)];
        assert_eq!(concordance_index(&[2.0, 1.0], &out).unwrap(), 1.0);
        assert_eq!(concordance_index(&[1.0, 2.0], &out).unwrap(), 0.0);
        let out3 = [o(1.0, true), o(2.0, true), o(3.0, true)];
        let c = concordance_index(&[1.0, 1.0, 2.0], &out3).unwrap();
        assert!((c - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn concordance_tied_times_rule() {
        // equal times, one event: the event subject should be riskier
        let out = [o(2.0, true), o(2.0, false)];
        let c = concordance(&[3.0, 1.0], &out).unwrap();
        assert_eq!((c.comparable_pairs, c.c_index), (1, 1.0));
        // both events at the same time: not comparable
        let out = [o(2.0, true), o(2.0, true)];
        assert_eq!(concordance(&[1.0, 2.0], &out), Err(Error::NoComparablePairs));
        // shorter time censored: not comparable
        let out = [o(1.0, false), o(2.0, true)];
        assert_eq!(concordance(&[1.0, 2.0], &out), Err(Error::NoComparablePairs));
    }

    #[test]
    fn concordance_length_mismatch() {
        assert!(matches!(
            concordance(&[1.0], &sample()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let s: Vec<Outcome<f32>> = vec![
            Outcome::new(1.0, true).unwrap(),
            Outcome::new(2.0, false).unwrap(),
            Outcome::new(3.0, true).unwrap(),
        ];
        let na = nelson_aalen(&s).unwrap();
        assert!((na.eval(3.0) - 4.0 / 3.0).abs() < 1e-6);
    }
}
