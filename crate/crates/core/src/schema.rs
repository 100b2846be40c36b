//! Feature-space harmonization: local schemas, the federated merge and
//! alignment of local tables to the federated column order.
//!
//! Anonymization happens at merge time, so the coordinator still sees the
//! plain canonical names; only the names handed back to clients are generic.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeding;
use crate::table::Table;

/// A client's local feature names and their canonical targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<String>,
    pub column_map: BTreeMap<String, String>,
    #[serde(rename = "closure")]
    pub generate_column_map_closure: bool,
}

impl DatasetSchema {
    /// Canonical name for a local column, if mapped.
    pub fn canonical(&self, local: &str) -> Option<&str> {
        self.column_map.get(local).map(String::as_str)
    }

    pub fn canonical_names(&self) -> BTreeSet<String> {
        self.column_map.values().cloned().collect()
    }

    /// Checks uniqueness of local and canonical names and, with closure,
    /// that every column is mapped.
    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("schema has no columns".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c) {
                return Err(Error::Schema(format!("duplicate local column `{c}`")));
            }
        }
        if let Some(k) = self.column_map.keys().find(|k| !seen.contains(k)) {
            return Err(Error::Schema(format!("column_map key `{k}` is not a column")));
        }
        let mut targets: BTreeMap<&str, &str> = BTreeMap::new();
        for (local, canon) in &self.column_map {
            if let Some(prev) = targets.insert(canon, local) {
                return Err(Error::Schema(format!(
                    "local columns `{prev}` and `{local}` both map to `{canon}`"
                )));
            }
        }
        if self.generate_column_map_closure {
            if let Some(c) = self.columns.iter().find(|c| !self.column_map.contains_key(*c)) {
                return Err(Error::Schema(format!("column `{c}` has no canonical name")));
            }
        }
        Ok(())
    }
}

/// Builds a local schema. Without a map every column is its own canonical
/// name; with `closure`, unmapped columns get identity entries.
pub fn make_schema<N: AsRef<str>>(
    columns: &[N],
    column_map: Option<&BTreeMap<String, String>>,
    closure: bool,
) -> Result<DatasetSchema> {
    let columns: Vec<String> = columns.iter().map(|c| c.as_ref().to_string()).collect();
    let mut map = column_map.cloned().unwrap_or_default();
    if column_map.is_none() || closure {
        for c in &columns {
            map.entry(c.clone()).or_insert_with(|| c.clone());
        }
    }
    let schema = DatasetSchema {
        columns,
        column_map: map,
        generate_column_map_closure: closure,
    };
    schema.validate()?;
    Ok(schema)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeOptions {
    pub anonymize: bool,
    pub extra_columns: usize,
    pub extra_column_prefix: String,
    pub random_state: Option<u64>,
}

impl Default for MergeOptions {
    fn default() -> Self {
        Self {
            anonymize: false,
            extra_columns: 0,
            extra_column_prefix: "extra_".into(),
            random_state: None,
        }
    }
}

/// Union feature space with a local-to-canonical map per client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FederatedSchema {
    pub canonical_columns: Vec<String>,
    pub per_client_map: BTreeMap<String, BTreeMap<String, String>>,
    pub anonymized: bool,
    pub extra_column_prefix: String,
    #[serde(skip)]
    pub name_permutation_seed: Option<u64>,
}

impl FederatedSchema {
    pub fn client_map(&self, client: &str) -> Result<&BTreeMap<String, String>> {
        self.per_client_map
            .get(client)
            .ok_or_else(|| Error::UnknownClient(client.to_string()))
    }

    /// Canonical names a client actually holds (excludes stubs).
    pub fn client_features(&self, client: &str) -> Result<BTreeSet<String>> {
        Ok(self.client_map(client)?.values().cloned().collect())
    }

    /// The client's slice of the federated schema, as an identity schema over
    /// canonical names.
    pub fn projection(&self, client: &str) -> Result<DatasetSchema> {
        let names: Vec<String> = self.client_features(client)?.into_iter().collect();
        make_schema(&names, None, true)
    }
}

/// Merges client schemas into the federated schema.
///
/// Canonical columns are the lexicographically sorted union, optionally
/// renamed to `feature_0..` under a seeded permutation, followed by
/// `extra_columns` placeholders named `prefix + index`.
pub fn merge_schemas(schemas: &BTreeMap<String, DatasetSchema>, opts: &MergeOptions) -> Result<FederatedSchema> {
    if schemas.is_empty() {
        return Err(Error::Schema("no schemas to merge".into()));
    }
    for s in schemas.values() {
        s.validate()?;
    }
    let union: Vec<String> = schemas
        .values()
        .flat_map(|s| s.column_map.values().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let (mut canonical_columns, rename): (Vec<String>, BTreeMap<String, String>) = if opts.anonymize {
        let seed = opts.random_state.unwrap_or_else(|| rand::rng().random());
        let mut rng = seeding::stream(seed, seeding::label("schema-anonymize"));
        let mut perm: Vec<usize> = (0..union.len()).collect();
        perm.shuffle(&mut rng);
        let rename = union
            .iter()
            .zip(&perm)
            .map(|(name, &p)| (name.clone(), format!("feature_{p}")))
            .collect();
        ((0..union.len()).map(|i| format!("feature_{i}")).collect(), rename)
    } else {
        let rename = union.iter().map(|n| (n.clone(), n.clone())).collect();
        (union, rename)
    };

    if opts.extra_columns > 0 {
        if let Some(clash) = canonical_columns
            .iter()
            .find(|c| c.starts_with(&opts.extra_column_prefix))
        {
            return Err(Error::Schema(format!(
                "extra column prefix `{}` collides with feature `{clash}`",
                opts.extra_column_prefix
            )));
        }
        canonical_columns.extend((0..opts.extra_columns).map(|i| format!("{}{i}", opts.extra_column_prefix)));
    }

    let per_client_map = schemas
        .iter()
        .map(|(client, s)| {
            let m = s
                .column_map
                .iter()
                .map(|(local, canon)| (local.clone(), rename[canon].clone()))
                .collect();
            (client.clone(), m)
        })
        .collect();

    Ok(FederatedSchema {
        canonical_columns,
        per_client_map,
        anonymized: opts.anonymize,
        extra_column_prefix: opts.extra_column_prefix.clone(),
        name_permutation_seed: opts.anonymize.then_some(opts.random_state).flatten(),
    })
}

/// Renames a client's table to canonical names and reindexes it to the
/// federated column order; absent columns become all-missing stubs.
pub fn align_table<S: Scalar>(table: &Table<S>, federated: &FederatedSchema, client: &str) -> Result<Table<S>> {
    let map = federated.client_map(client)?;
    let mut by_canonical: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, col) in table.columns().iter().enumerate() {
        let canon = map
            .get(col)
            .ok_or_else(|| Error::ColumnNotInSchema(col.clone()))?;
        by_canonical.insert(canon.as_str(), i);
    }
    let n = table.n_rows();
    let data = federated
        .canonical_columns
        .iter()
        .map(|c| match by_canonical.get(c.as_str()) {
            Some(&i) => table.column_at(i).to_vec(),
            None => vec![S::nan(); n],
        })
        .collect();
    Table::new(federated.canonical_columns.clone(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn two_clients() -> BTreeMap<String, DatasetSchema> {
        BTreeMap::from([
            ("A".to_string(), make_schema(&["age", "tsize"], None, true).unwrap()),
            ("B".to_string(), make_schema(&["age", "pnodes"], None, true).unwrap()),
        ])
    }

    #[test]
    fn make_schema_variants() {
        let map = BTreeMap::from([("AGE".to_string(), "age".to_string())]);
        let s = make_schema(&["AGE"], Some(&map), true).unwrap();
        assert_eq!(s.canonical_names(), BTreeSet::from(["age".to_string()]));

        let s = make_schema(&["age"], None, true).unwrap();
        assert_eq!(s.canonical("age"), Some("age"));

        let dup = BTreeMap::from([("a".to_string(), "x".to_string()), ("b".to_string(), "x".to_string())]);
        assert!(make_schema(&["a", "b"], Some(&dup), true).is_err());
        assert!(make_schema(&["a", "a"], None, true).is_err());

        // closure fills identity entries next to explicit mappings
        let s = make_schema(&["AGE", "size"], Some(&map), true).unwrap();
        assert_eq!(s.canonical("size"), Some("size"));
        // without closure unmapped columns stay unmapped
        let s = make_schema(&["AGE", "size"], Some(&map), false).unwrap();
        assert_eq!(s.canonical("size"), None);
    }

    #[test]
    fn merge_union_sorted() {
        let f = merge_schemas(&two_clients(), &MergeOptions::default()).unwrap();
        assert_eq!(f.canonical_columns, names(&["age", "pnodes", "tsize"]));
        assert_eq!(f.per_client_map["A"].len(), 2);
        assert_eq!(f.per_client_map["B"].len(), 2);
    }

    #[test]
    fn merge_extra_columns() {
        let opts = MergeOptions {
            extra_columns: 2,
            ..Default::default()
        };
        let f = merge_schemas(&two_clients(), &opts).unwrap();
        assert_eq!(f.canonical_columns, names(&["age", "pnodes", "tsize", "extra_0", "extra_1"]));

        let clash = BTreeMap::from([("A".to_string(), make_schema(&["extra_x"], None, true).unwrap())]);
        assert!(merge_schemas(&clash, &opts).is_err());
        assert!(merge_schemas(&BTreeMap::new(), &opts).is_err());
    }

    #[test]
    fn anonymization_is_a_seeded_bijection() {
        let mut schemas = two_clients();
        schemas.insert("C".into(), make_schema(&["estrec"], None, true).unwrap());
        let opts = MergeOptions {
            anonymize: true,
            random_state: Some(42),
            ..Default::default()
        };
        let a = merge_schemas(&schemas, &opts).unwrap();
        let b = merge_schemas(&schemas, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.canonical_columns, names(&["feature_0", "feature_1", "feature_2", "feature_3"]));
        // the shared feature `age` maps to the same generic name for A and B
        assert_eq!(a.per_client_map["A"]["age"], a.per_client_map["B"]["age"]);
        let targets: BTreeSet<_> = a.per_client_map.values().flat_map(|m| m.values()).collect();
        assert_eq!(targets.len(), 4);
    }

    #[test]
    fn merge_is_idempotent_over_projections() {
        let f = merge_schemas(&two_clients(), &MergeOptions::default()).unwrap();
        let projected: BTreeMap<_, _> = f
            .per_client_map
            .keys()
            .map(|c| (c.clone(), f.projection(c).unwrap()))
            .collect();
        let again = merge_schemas(&projected, &MergeOptions::default()).unwrap();
        assert_eq!(again.canonical_columns, f.canonical_columns);
    }

    #[test]
    fn align_renames_and_stubs() {
        let map = BTreeMap::from([("AGE".to_string(), "age".to_string())]);
        let schemas = BTreeMap::from([
            ("A".to_string(), make_schema(&["AGE"], Some(&map), true).unwrap()),
            ("B".to_string(), make_schema(&["age", "pnodes"], None, true).unwrap()),
        ]);
        let f = merge_schemas(&schemas, &MergeOptions::default()).unwrap();
        let local: Table<f64> = Table::new(names(&["AGE"]), vec![vec![50.0, 61.0]]).unwrap();
        let aligned = align_table(&local, &f, "A").unwrap();
        assert_eq!(aligned.columns(), &names(&["age", "pnodes"])[..]);
        assert_eq!(aligned.column("age").unwrap(), &[50.0, 61.0]);
        assert!(aligned.column("pnodes").unwrap().iter().all(|v| v.is_nan()));

        let b = Table::new(names(&["age", "pnodes"]), vec![vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(align_table(&b, &f, "B").unwrap(), b);

        let bad = Table::new(names(&["weight"]), vec![vec![1.0]]).unwrap();
        assert_eq!(align_table(&bad, &f, "A"), Err(Error::ColumnNotInSchema("weight".into())));
        assert!(align_table(&b, &f, "Z").is_err());
    }

    #[test]
    fn schema_documents() {
        let s = make_schema(&["age"], None, true).unwrap();
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"columns":["age"],"column_map":{"age":"age"},"closure":true}"#
        );
        let f = merge_schemas(&two_clients(), &MergeOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&f).unwrap();
        let keys: BTreeSet<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(
            keys,
            BTreeSet::from(
                ["anonymized", "canonical_columns", "extra_column_prefix", "per_client_map"].map(String::from)
            )
        );
    }
}
