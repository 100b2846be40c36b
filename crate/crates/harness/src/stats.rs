//! Two-sided paired tests on per-evaluation deltas.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::{HarnessError, Result};

/// Largest zero-free sample size handled by exact enumeration.
pub const WILCOXON_EXACT_MAX: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub n: usize,
    pub mean_delta: f64,
    pub median_delta: f64,
    pub wilcoxon_p: f64,
    pub paired_t_p: f64,
}

/// Runs both tests on `deltas` (treatment minus baseline).
pub fn paired_test(deltas: &[f64]) -> Result<PairedTestResult> {
    Ok(PairedTestResult {
        n: deltas.len(),
        mean_delta: mean(deltas),
        median_delta: quantile(&sorted(deltas), 0.5),
        wilcoxon_p: wilcoxon_signed_rank(deltas)?,
        paired_t_p: paired_t(deltas)?,
    })
}

/// Wilcoxon signed-rank test, two-sided. Zeros are dropped and tied
/// magnitudes share their average rank. Exact null distribution up to
/// [`WILCOXON_EXACT_MAX`] nonzero deltas, tie-corrected normal approximation
/// above. All-zero input gives p = 1.
pub fn wilcoxon_signed_rank(deltas: &[f64]) -> Result<f64> {
    check(deltas)?;
    let nz: Vec<f64> = deltas.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return Ok(1.0);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| nz[a].abs().total_cmp(&nz[b].abs()));

    // doubled ranks stay integral under averaging
    let mut rank2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nz[order[j + 1]].abs() == nz[order[i]].abs() {
            j += 1;
        }
        let avg2 = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            rank2[k] = avg2;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w2: u64 = (0..n).filter(|&k| nz[k] > 0.0).map(|k| rank2[k]).sum();

    if n <= WILCOXON_EXACT_MAX {
        let total: u64 = rank2.iter().sum();
        let mut counts = vec![0f64; total as usize + 1];
        counts[0] = 1.0;
        let mut reach = 0usize;
        for &r in &rank2 {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] != 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let all = 2f64.powi(n as i32);
        let lower: f64 = counts[..=w2 as usize].iter().sum();
        let upper: f64 = counts[w2 as usize..].iter().sum();
        return Ok((2.0 * lower.min(upper) / all).min(1.0));
    }

    let nf = n as f64;
    let w = w2 as f64 / 2.0;
    let mu = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = (w - mu) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok((2.0 * normal.sf(z.abs())).min(1.0))
}

/// Paired t-test of mean zero, two-sided. Zero variance gives p = 1.
pub fn paired_t(deltas: &[f64]) -> Result<f64> {
    check(deltas)?;
    let n = deltas.len() as f64;
    let sd = std_dev(deltas);
    if sd == 0.0 || !sd.is_finite() {
        return Ok(1.0);
    }
    let t = mean(deltas) / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("valid degrees of freedom");
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

fn check(deltas: &[f64]) -> Result<()> {
    if deltas.len() < 2 {
        return Err(HarnessError::Stats(format!("need at least 2 deltas, got {}", deltas.len())));
    }
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(HarnessError::Stats("non-finite delta".into()));
    }
    Ok(())
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_opposite_deltas() {
        assert_eq!(wilcoxon_signed_rank(&[1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(paired_t(&[0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(wilcoxon_signed_rank(&[0.0, 0.0]).unwrap(), 1.0);
        assert!(wilcoxon_signed_rank(&[1.0]).is_err());
    }

    #[test]
    fn exact_small_sample() {
        // all five positive with distinct ranks: one of 32 sign patterns is as extreme on each side
        let p = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((p - 2.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(std_dev(&[0.6; 5]), 0.0);
    }
}
