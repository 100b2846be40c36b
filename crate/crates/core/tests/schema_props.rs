use std::collections::BTreeMap;

use fedsurv_core::schema::{align_table, make_schema, merge_schemas, MergeOptions};
use fedsurv_core::table::Table;
use proptest::prelude::*;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Client tables over random subsets of `f0..f{p-1}`.
fn clients(seed: u64) -> BTreeMap<String, Table<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(1..=8);
    let k = rng.random_range(1..=4);
    (0..k)
        .map(|c| {
            let m = rng.random_range(1..=p);
            let cols = index::sample(&mut rng, p, m).into_vec();
            let n = rng.random_range(0..=6);
            let data = cols.iter().map(|_| (0..n).map(|_| rng.random::<f64>() * 1e3 - 5e2).collect()).collect();
            let names = cols.iter().map(|j| format!("f{j}")).collect();
            (format!("c{c}"), Table::new(names, data).unwrap())
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn alignment_copies_bits_and_stubs_the_rest(seed: u64, extra in 0usize..3) {
        let tables = clients(seed);
        let schemas = tables.iter().map(|(c, t)| (c.clone(), make_schema(t.columns(), None, true).unwrap())).collect();
        let opts = MergeOptions { extra_columns: extra, ..MergeOptions::default() };
        let fed = merge_schemas(&schemas, &opts).unwrap();
        for (c, t) in &tables {
            let a = align_table(t, &fed, c).unwrap();
            prop_assert_eq!(a.columns(), &fed.canonical_columns[..]);
            for name in a.columns() {
                let got = a.column(name).unwrap();
                match t.column(name) {
                    Some(orig) => prop_assert!(orig.iter().zip(got).all(|(x, y)| x.to_bits() == y.to_bits())),
                    None => prop_assert!(got.iter().all(|v| v.is_nan())),
                }
            }
        }
    }

    #[test]
    fn anonymization_only_renames(seed: u64, key: u64) {
        let tables = clients(seed);
        let schemas = tables.iter().map(|(c, t)| (c.clone(), make_schema(t.columns(), None, true).unwrap())).collect();
        let plain = merge_schemas(&schemas, &MergeOptions::default()).unwrap();
        let anon = merge_schemas(&schemas, &MergeOptions { anonymize: true, random_state: Some(key), ..MergeOptions::default() }).unwrap();
        prop_assert_eq!(plain.canonical_columns.len(), anon.canonical_columns.len());
        prop_assert!(anon.canonical_columns.iter().all(|c| c.starts_with("feature_")));
        for (c, t) in &tables {
            let a = align_table(t, &plain, c).unwrap();
            let b = align_table(t, &anon, c).unwrap();
            for local in t.columns() {
                let x = a.column(&plain.per_client_map[c][local]).unwrap();
                let y = b.column(&anon.per_client_map[c][local]).unwrap();
                prop_assert!(x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits()));
            }
        }
        let again = merge_schemas(&schemas, &MergeOptions { anonymize: true, random_state: Some(key), ..MergeOptions::default() }).unwrap();
        prop_assert_eq!(again, anon);
    }
}
