mod common;

use std::collections::BTreeMap;

use fedsurv_harness::config::Resampling;
use fedsurv_harness::experiment::{prepare_site_split, retained_features};
use fedsurv_harness::records::{read_records, records_to_string};
use fedsurv_harness::split::{partition_clients, withhold_count};
use fedsurv_harness::{run_experiment, Configuration, ExperimentConfig, RunManifest};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gbsg2_shape() {
    let d = common::gbsg2();
    assert_eq!(d.n_rows(), 686);
    assert_eq!(d.feature_names().len(), 8);
    assert_eq!(d.n_events(), 299);
}

#[test]
fn partition_of_686_into_10() {
    let parts = partition_clients(686, 10, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, [68, 68, 68, 68, 69, 69, 69, 69, 69, 69]);
    let mut all: Vec<usize> = parts.concat();
    all.sort_unstable();
    assert_eq!(all, (0..686).collect::<Vec<_>>());
}

#[test]
fn withholding_rounds_half_up() {
    assert_eq!(withhold_count(8, 0.35), 3);
    assert_eq!(withhold_count(10, 0.35), 4);
    assert_eq!(withhold_count(8, 0.0), 0);
}

#[test]
fn records_are_deterministic_and_thread_independent() {
    let d = common::gbsg2();
    let cfg = common::quick(4);
    let a = records_to_string(&run_experiment(&cfg, &d).unwrap());
    let b = records_to_string(&run_experiment(&ExperimentConfig { threads: 1, ..cfg.clone() }, &d).unwrap());
    assert_eq!(a, b);
    let c = records_to_string(&run_experiment(&ExperimentConfig { seed: 100, ..cfg }, &d).unwrap());
    assert_ne!(a, c);
    assert_eq!(records_to_string(&read_records(a.as_bytes()).unwrap()), a);
}

#[test]
fn record_counts_and_non_participants() {
    let d = common::gbsg2();
    let cfg = common::quick(4);
    let records = run_experiment(&cfg, &d).unwrap();
    let mut per: BTreeMap<Configuration, usize> = BTreeMap::new();
    for r in &records {
        *per.entry(r.configuration).or_default() += 1;
    }
    let expected = cfg.n_site_splits * cfg.n_folds * cfg.n_clients;
    let configs = [
        Configuration::Local,
        Configuration::Fed(2),
        Configuration::Fed(3),
        Configuration::Fed(4),
        Configuration::CentralizedSrf,
        Configuration::Centralized,
    ];
    assert_eq!(per.keys().copied().collect::<Vec<_>>(), configs);
    assert!(per.values().all(|&n| n == expected));

    // clients outside Fed(2) are scored with their local forest
    let key = |r: &fedsurv_harness::RunRecord| (r.site_split, r.fold, r.client);
    let local: BTreeMap<_, _> = records
        .iter()
        .filter(|r| r.configuration == Configuration::Local)
        .map(|r| (key(r), r.c_index))
        .collect();
    for r in records.iter().filter(|r| r.configuration == Configuration::Fed(2) && r.client >= 2) {
        assert_eq!(r.c_index, local[&key(r)]);
    }
    for r in &records {
        if let Some(c) = r.c_index {
            assert!((0.0..=1.0).contains(&c));
        }
    }
}

#[test]
fn retained_features_are_shared_by_all_folds() {
    let d = common::gbsg2();
    let cfg = ExperimentConfig { n_clients: 10, ..common::quick(10) };
    let retained = retained_features(&cfg, &d).unwrap();
    for (s, kept) in retained.iter().enumerate() {
        let split = prepare_site_split(&cfg, &d, s).unwrap();
        for cl in &split.clients {
            assert_eq!(cl.retained, kept[cl.index]);
            assert_eq!(cl.retained.len(), 8 - 3);
            assert_eq!(cl.units.len(), cfg.n_folds);
            // every fold tests on a disjoint slice and trains on the rest
            let mut tested: Vec<usize> = cl.units.iter().flat_map(|u| u.1.clone()).collect();
            tested.sort_unstable();
            assert_eq!(tested, (0..cl.rows.len()).collect::<Vec<_>>());
            for (train, test) in &cl.units {
                assert_eq!(train.len() + test.len(), cl.rows.len());
            }
        }
    }
}

#[test]
fn monte_carlo_gives_one_record_per_round() {
    let d = common::gbsg2();
    let cfg = ExperimentConfig {
        n_clients: 2,
        n_site_splits: 1,
        resampling: Resampling::MonteCarlo,
        mccv_rounds: 25,
        ..common::quick(2)
    };
    let records = run_experiment(&cfg, &d).unwrap();
    let local = records.iter().filter(|r| r.configuration == Configuration::Local).count();
    assert_eq!(local, 50);
    let split = prepare_site_split(&cfg, &d, 0).unwrap();
    for cl in &split.clients {
        for (train, test) in &cl.units {
            assert_eq!(test.len(), (0.3 * cl.rows.len() as f64 + 0.5).floor() as usize);
            assert_eq!(train.len() + test.len(), cl.rows.len());
        }
    }
}

#[test]
fn manifest_describes_the_run() {
    let d = common::gbsg2();
    let cfg = common::quick(3);
    let records = run_experiment(&cfg, &d).unwrap();
    let m = RunManifest::build(&cfg, &d, &records).unwrap();
    assert_eq!(m.withhold_count, 3);
    assert_eq!(m.dataset.n_rows, 686);
    assert_eq!(m.dataset.n_events, 299);
    assert_eq!(m.retained_features.len(), 2);
    assert!(m.retained_features.iter().flatten().all(|r| r.len() == 5));
    assert_eq!(m.records_per_configuration["Local"], 18);
    let json: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
    assert_eq!(json["config"]["n_clients"], 3);
    assert!(json["c_index_rule"].as_str().unwrap().starts_with("harrell"));
    assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
}
