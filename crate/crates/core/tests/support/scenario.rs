//! Random multi-site federation set-ups.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use fedsurv_core::federation::{site_features, LocalModel, UpdateMethod, UpdateWeighting};
use fedsurv_core::forest::{fit_forest, ForestParams};
use fedsurv_core::schema::{align_table, make_schema, merge_schemas, MergeOptions};
use fedsurv_core::survival::Outcome;
use fedsurv_core::table::Table;
use fedsurv_core::tree::{MaxFeatures, TreeParams};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Scenario {
    pub models: Vec<LocalModel<f64>>,
    /// Each site's rows aligned to the federated columns.
    pub aligned: BTreeMap<String, Table<f64>>,
    pub n_estimators: usize,
}

/// Sites with random feature subsets of a random union, each with its own
/// small forest. Outcomes depend on the first union feature when a site has it.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(2..=7);
    let k = rng.random_range(2..=5);
    let union: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
    let n_estimators = rng.random_range(2..=6);
    let params = ForestParams {
        n_estimators,
        tree: TreeParams {
            max_depth: Some(rng.random_range(1..=4)),
            max_features: if rng.random_bool(0.5) { MaxFeatures::Sqrt } else { MaxFeatures::All },
            ..TreeParams::default()
        },
        ..ForestParams::default()
    };
    let method = if rng.random_bool(0.5) { UpdateMethod::All } else { UpdateMethod::Constant };
    let weighting = if rng.random_bool(0.5) { UpdateWeighting::Equal } else { UpdateWeighting::SiteSize };

    let mut locals = Vec::new();
    for c in 0..k {
        let m = rng.random_range(1..=p);
        let mut cols: Vec<usize> = index::sample(&mut rng, p, m).into_vec();
        cols.sort_unstable();
        let n = rng.random_range(12..=50);
        let data: Vec<Vec<f64>> = cols
            .iter()
            .map(|_| (0..n).map(|_| f64::from(rng.random_range(0..6u32))).collect())
            .collect();
        let outcomes: Vec<Outcome<f64>> = (0..n)
            .map(|i| {
                let signal = if cols[0] == 0 { data[0][i] } else { 0.0 };
                let t = rng.random_range(1.0..20.0) / (1.0 + signal);
                Outcome::new(t, rng.random_bool(0.7)).unwrap()
            })
            .collect();
        let names: Vec<String> = cols.iter().map(|&j| union[j].clone()).collect();
        locals.push((format!("site{c}"), Table::new(names, data).unwrap(), outcomes));
    }

    let schemas = locals
        .iter()
        .map(|(id, t, _)| (id.clone(), make_schema(t.columns(), None, true).unwrap()))
        .collect();
    let merge = MergeOptions {
        anonymize: rng.random_bool(0.3),
        random_state: Some(rng.random()),
        ..MergeOptions::default()
    };
    let federated = merge_schemas(&schemas, &merge).unwrap();

    let mut aligned = BTreeMap::new();
    let mut models = Vec::new();
    for (id, table, outcomes) in &locals {
        let a = align_table(table, &federated, id).unwrap();
        let features = site_features(&a);
        let order: Vec<String> = features.iter().cloned().collect();
        let forest = fit_forest(&a, outcomes, &params, &order, rng.random()).unwrap();
        models.push(LocalModel::new(forest, id.clone(), features, method, weighting).unwrap());
        aligned.insert(id.clone(), a);
    }
    Scenario {
        models,
        aligned,
        n_estimators,
    }
}

/// Every active tree only splits on features its site holds, and every site
/// can score its own aligned rows.
pub fn check_safety(federated: &BTreeMap<String, LocalModel<f64>>, scenario: &Scenario) -> Result<(), String> {
    for (id, model) in federated {
        let have: &BTreeSet<String> = model.site_features();
        for t in model.active_set().iter().chain(model.federated_trees()) {
            if let Some(f) = t.first_missing_feature(have) {
                return Err(format!("site {id} holds a tree from {} splitting on {f}", t.origin_site()));
            }
        }
        model
            .predict_risk(&scenario.aligned[id])
            .map_err(|e| format!("site {id}: {e}"))?;
    }
    Ok(())
}
