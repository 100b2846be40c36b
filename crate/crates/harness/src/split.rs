//! Feature withholding, client partitioning and per-client resampling.

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::{HarnessError, Result};

/// `round(x)` with halves rounded up, for non-negative `x`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Number of features withheld from `count` at `fraction`.
pub fn withhold_count(count: usize, fraction: f64) -> usize {
    // 1e-9 absorbs representation error such as 0.35 * 10 = 3.4999999999999996
    round_half_up(fraction * count as f64 + 1e-9).min(count)
}

/// Withholds a uniformly chosen subset of features; the retained ones keep
/// their input order.
pub fn withhold_features<R: Rng + ?Sized>(features: &[String], fraction: f64, rng: &mut R) -> Result<Vec<String>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(HarnessError::Config(format!("withhold fraction {fraction} outside [0, 1)")));
    }
    let w = withhold_count(features.len(), fraction);
    if w >= features.len() {
        return Err(HarnessError::NoFeaturesLeft);
    }
    let mut dropped = vec![false; features.len()];
    for i in index::sample(rng, features.len(), w) {
        dropped[i] = true;
    }
    Ok(features
        .iter()
        .zip(dropped)
        .filter(|(_, d)| !d)
        .map(|(f, _)| f.clone())
        .collect())
}

/// Splits `0..n` into `k` disjoint random groups whose sizes differ by at
/// most one; each group is sorted.
pub fn partition_clients<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(HarnessError::Config("need at least one client".into()));
    }
    if n < k {
        return Err(HarnessError::TooFewRows { rows: n, needed: k });
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(rng);
    Ok(balanced_chunks(&rows, k)
        .into_iter()
        .map(|mut c| {
            c.sort_unstable();
            c
        })
        .collect())
}

/// Assigns each of `n` rows a fold in `0..n_folds`; fold sizes differ by at
/// most one.
pub fn make_folds<R: Rng + ?Sized>(n: usize, n_folds: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n_folds < 2 {
        return Err(HarnessError::Config("need at least two folds".into()));
    }
    if n < n_folds {
        return Err(HarnessError::TooFewRows { rows: n, needed: n_folds });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % n_folds;
    }
    Ok(fold)
}

/// Random train/test split of `n` rows; returns sorted (train, test).
pub fn monte_carlo_split<R: Rng + ?Sized>(n: usize, test_fraction: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_test = round_half_up(test_fraction * n as f64);
    if n_test == 0 || n_test >= n {
        return Err(HarnessError::TooFewRows { rows: n, needed: 2 });
    }
    let mut test: Vec<usize> = index::sample(rng, n, n_test).into_vec();
    test.sort_unstable();
    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..n).filter(|&i| !is_test[i]).collect();
    Ok((train, test))
}

fn balanced_chunks<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    let (base, extra) = (items.len() / k, items.len() % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for c in 0..k {
        let len = base + usize::from(c < extra);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use fedsurv_core::seeding;

    use super::*;

    fn feats(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn withhold_counts() {
        assert_eq!(withhold_count(8, 0.35), 3);
        assert_eq!(withhold_count(1, 0.35), 0);
        assert_eq!(withhold_count(8, 0.0), 0);
        assert_eq!(withhold_count(10, 0.35), 4);
        assert_eq!(withhold_count(2, 0.25), 1);
        let mut rng = seeding::stream(1, 0);
        let kept = withhold_features(&feats(8), 0.35, &mut rng).unwrap();
        assert_eq!(kept.len(), 5);
        assert!(kept.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(withhold_features(&feats(8), 0.0, &mut rng).unwrap(), feats(8));
        assert_eq!(withhold_features(&feats(1), 0.35, &mut rng).unwrap(), feats(1));
        assert!(matches!(
            withhold_features(&feats(1), 0.5, &mut rng),
            Err(HarnessError::NoFeaturesLeft)
        ));
    }

    #[test]
    fn gbsg2_sized_partition() {
        let mut rng = seeding::stream(3, 0);
        let parts = partition_clients(686, 10, &mut rng).unwrap();
        let mut sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [vec![68; 4], vec![69; 6]].concat());
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        assert_eq!(all, (0..686).collect::<Vec<_>>());
        assert_eq!(partition_clients(5, 1, &mut rng).unwrap(), vec![vec![0, 1, 2, 3, 4]]);
        assert!(partition_clients(3, 4, &mut rng).is_err());
    }

    #[test]
    fn fold_sizes_balanced() {
        let mut rng = seeding::stream(4, 0);
        let folds = make_folds(69, 5, &mut rng).unwrap();
        let mut counts = [0; 5];
        for f in folds {
            counts[f] += 1;
        }
        assert_eq!(counts, [14, 14, 14, 14, 13]);
        assert!(make_folds(4, 5, &mut rng).is_err());
    }

    #[test]
    fn monte_carlo_split_is_a_partition() {
        let mut rng = seeding::stream(5, 0);
        let (train, test) = monte_carlo_split(69, 0.3, &mut rng).unwrap();
        assert_eq!(test.len(), 21);
        assert_eq!(train.len() + test.len(), 69);
        assert!(train.iter().all(|i| test.binary_search(i).is_err()));
    }
}
