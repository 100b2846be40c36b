//! Column-major numeric feature table with NaN as the missing marker.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Table<S> {
    columns: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<Vec<S>>,
    n_rows: usize,
}

impl<S: Scalar> Table<S> {
    /// Builds a table from named columns of equal length.
    pub fn new(columns: Vec<String>, data: Vec<Vec<S>>) -> Result<Self> {
        if columns.len() != data.len() {
            return Err(Error::LengthMismatch {
                what: "column names vs columns",
                left: columns.len(),
                right: data.len(),
            });
        }
        let n_rows = data.first().map_or(0, Vec::len);
        if let Some((i, c)) = data.iter().enumerate().find(|(_, c)| c.len() != n_rows) {
            return Err(Error::LengthMismatch {
                what: "column length",
                left: n_rows,
                right: data[i].len().min(c.len()),
            });
        }
        let mut index = HashMap::with_capacity(columns.len());
        for (i, name) in columns.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Dataset(format!("duplicate column `{name}`")));
            }
        }
        Ok(Self {
            columns,
            index,
            data,
            n_rows,
        })
    }

    pub fn from_rows(columns: Vec<String>, rows: &[Vec<S>]) -> Result<Self> {
        let mut data = vec![Vec::with_capacity(rows.len()); columns.len()];
        for row in rows {
            if row.len() != columns.len() {
                return Err(Error::LengthMismatch {
                    what: "row width",
                    left: columns.len(),
                    right: row.len(),
                });
            }
            for (col, &v) in data.iter_mut().zip(row) {
                col.push(v);
            }
        }
        let mut t = Self::new(columns, data)?;
        t.n_rows = rows.len();
        Ok(t)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn column(&self, name: &str) -> Option<&[S]> {
        self.column_index(name).map(|i| self.data[i].as_slice())
    }

    pub fn column_at(&self, i: usize) -> &[S] {
        &self.data[i]
    }

    pub fn value(&self, row: usize, col: usize) -> S {
        self.data[col][row]
    }

    pub fn row(&self, i: usize) -> TableRow<'_, S> {
        TableRow { table: self, row: i }
    }

    /// Rows at `indices`, in that order (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let data = self
            .data
            .iter()
            .map(|c| indices.iter().map(|&i| c[i]).collect())
            .collect();
        Self {
            columns: self.columns.clone(),
            index: self.index.clone(),
            data,
            n_rows: indices.len(),
        }
    }

    pub fn select_columns<N: AsRef<str>>(&self, names: &[N]) -> Result<Self> {
        let mut columns = Vec::with_capacity(names.len());
        let mut data = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            let i = self
                .column_index(n)
                .ok_or_else(|| Error::UnknownFeature(n.to_string()))?;
            columns.push(n.to_string());
            data.push(self.data[i].clone());
        }
        let mut t = Self::new(columns, data)?;
        t.n_rows = self.n_rows;
        Ok(t)
    }

    /// Columns with no missing value, in table order.
    pub fn complete_columns(&self) -> Vec<String> {
        self.columns
            .iter()
            .zip(&self.data)
            .filter(|(_, c)| c.iter().all(|v| !v.is_nan()))
            .map(|(n, _)| n.clone())
            .collect()
    }

    /// Replaces every missing cell via `fill(column_index)`.
    pub fn fill_missing(&self, mut fill: impl FnMut(usize) -> S) -> Self {
        let mut out = self.clone();
        for (j, col) in out.data.iter_mut().enumerate() {
            for v in col.iter_mut().filter(|v| v.is_nan()) {
                *v = fill(j);
            }
        }
        out
    }

    /// Stacks tables with identical column lists.
    pub fn vstack(tables: &[&Self]) -> Result<Self> {
        let first = tables.first().ok_or(Error::EmptyDataset)?;
        let mut data: Vec<Vec<S>> = vec![Vec::new(); first.n_cols()];
        let mut n_rows = 0;
        for t in tables {
            if t.columns != first.columns {
                return Err(Error::Dataset("vstack on tables with different columns".into()));
            }
            for (dst, src) in data.iter_mut().zip(&t.data) {
                dst.extend_from_slice(src);
            }
            n_rows += t.n_rows;
        }
        let mut t = Self::new(first.columns.clone(), data)?;
        t.n_rows = n_rows;
        Ok(t)
    }
}

/// Named feature access for a single row.
pub trait FeatureLookup<S> {
    fn feature(&self, name: &str) -> Option<S>;
}

#[derive(Debug, Clone, Copy)]
pub struct TableRow<'a, S> {
    table: &'a Table<S>,
    row: usize,
}

impl<S: Scalar> FeatureLookup<S> for TableRow<'_, S> {
    fn feature(&self, name: &str) -> Option<S> {
        self.table
            .column_index(name)
            .map(|c| self.table.value(self.row, c))
    }
}

impl<S: Copy> FeatureLookup<S> for HashMap<String, S> {
    fn feature(&self, name: &str) -> Option<S> {
        self.get(name).copied()
    }
}

impl<S: Copy> FeatureLookup<S> for BTreeMap<String, S> {
    fn feature(&self, name: &str) -> Option<S> {
        self.get(name).copied()
    }
}
