use fedsurv_harness::stats::{paired_t, paired_test, wilcoxon_signed_rank};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Kolmogorov-Smirnov distance between the sample and Uniform(0, 1).
fn ks_uniform(mut p: Vec<f64>) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

/// Upper standard-normal tail by Simpson integration of the density.
fn normal_sf(z: f64) -> f64 {
    let (a, b, m) = (z, z + 12.0, 20_000);
    let h = (b - a) / m as f64;
    let f = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let inner: f64 = (1..m).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + inner + f(b)) * h / 3.0
}

#[test]
fn p_values_are_uniform_under_the_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut w, mut t) = (Vec::new(), Vec::new());
    for _ in 0..1000 {
        let d: Vec<f64> = (0..30).map(|_| StandardNormal.sample(&mut rng)).collect();
        w.push(wilcoxon_signed_rank(&d).unwrap());
        t.push(paired_t(&d).unwrap());
    }
    // two-sided KS critical value at alpha 0.01
    let crit = 1.628 / 1000f64.sqrt();
    let (dw, dt) = (ks_uniform(w), ks_uniform(t));
    assert!(dw < crit, "Wilcoxon KS {dw}");
    assert!(dt < crit, "t KS {dt}");
}

#[test]
fn hand_computed_fixture() {
    // ten positive deltas: only the all-positive and all-negative patterns reach the extremes
    let up: Vec<f64> = (1..=10).map(f64::from).collect();
    assert!((wilcoxon_signed_rank(&up).unwrap() - 2.0 / 1024.0).abs() < 1e-15);
    // the -1 has rank 1, so W- = 1; patterns with W- <= 1 are {} and {1}
    let mixed = [-1.0, 2.0, 3.0, 4.0, 5.0];
    assert!((wilcoxon_signed_rank(&mixed).unwrap() - 4.0 / 32.0).abs() < 1e-15);
    // tied magnitudes share rank 1.5; W+ = 4.5 and three of eight patterns reach it
    let tied = [1.0, -1.0, 2.0];
    assert!((wilcoxon_signed_rank(&tied).unwrap() - 0.75).abs() < 1e-15);

    // df = 2 has closed form p = 1 - t / sqrt(2 + t^2); here t^2 = 12
    let p = paired_t(&[1.0, 2.0, 3.0]).unwrap();
    assert!((p - (1.0 - (6.0f64 / 7.0).sqrt())).abs() < 1e-10, "{p}");

    // large-sample normal approximation: W+ = 465, mean 232.5, variance 2363.75
    let long: Vec<f64> = (1..=30).map(f64::from).collect();
    let z = (465.0 - 232.5) / 2363.75f64.sqrt();
    let p = wilcoxon_signed_rank(&long).unwrap();
    assert!((p / (2.0 * normal_sf(z)) - 1.0).abs() < 1e-6, "{p}");

    let r = paired_test(&[0.01, 0.03, -0.01, 0.02, 0.05]).unwrap();
    assert_eq!(r.n, 5);
    assert!((r.mean_delta - 0.02).abs() < 1e-15);
    assert_eq!(r.median_delta, 0.02);
}

#[test]
fn sign_flip_leaves_p_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [6, 25, 26, 40] {
        let d: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let neg: Vec<f64> = d.iter().map(|x| -x).collect();
        assert!((wilcoxon_signed_rank(&d).unwrap() - wilcoxon_signed_rank(&neg).unwrap()).abs() < 1e-12);
        assert!((paired_t(&d).unwrap() - paired_t(&neg).unwrap()).abs() < 1e-12);
    }
}
