//! Survival CSV ingestion and one-hot encoding of categorical covariates.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::survival::Outcome;
use crate::table::Table;

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    /// NaN marks a missing cell.
    Numeric(Vec<f64>),
    Categorical(Vec<Option<String>>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&i| v[i]).collect()),
            Column::Categorical(v) => Column::Categorical(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// Covariates (before encoding) paired with outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Column>,
    outcomes: Vec<Outcome<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub time_column: String,
    pub event_column: String,
    /// Declared categorical columns; `None` infers from the values.
    pub categorical: Option<BTreeSet<String>>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            time_column: "time".into(),
            event_column: "event".into(),
            categorical: None,
        }
    }
}

fn is_missing_token(s: &str) -> bool {
    matches!(s, "" | "NA" | "NaN" | "nan" | "null")
}

fn parse_event(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "t" => Some(true),
        "0" | "false" | "no" | "f" => Some(false),
        _ => None,
    }
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Column>, outcomes: Vec<Outcome<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Dataset("column names and columns differ in count".into()));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != outcomes.len()) {
            return Err(Error::LengthMismatch {
                what: "column vs outcomes",
                left: c.len(),
                right: outcomes.len(),
            });
        }
        Ok(Self {
            names,
            columns,
            outcomes,
        })
    }

    pub fn from_csv_path(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_csv_reader(file, opts)
    }

    pub fn from_csv_reader<R: Read>(reader: R, opts: &CsvOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Dataset(format!("missing column `{name}`")))
        };
        let time_idx = find(&opts.time_column)?;
        let event_idx = find(&opts.event_column)?;
        let feature_idx: Vec<usize> = (0..header.len())
            .filter(|&i| i != time_idx && i != event_idx)
            .collect();

        let mut raw: Vec<Vec<String>> = vec![Vec::new(); feature_idx.len()];
        let mut outcomes = Vec::new();
        let mut problems = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            // 1-based data line numbers, header excluded
            let line = r + 1;
            let time_s = rec.get(time_idx).unwrap_or("");
            let event_s = rec.get(event_idx).unwrap_or("");
            let time = time_s.parse::<f64>().ok().filter(|t| t.is_finite() && *t > 0.0);
            let event = parse_event(event_s);
            match (time, event) {
                (Some(t), Some(e)) => outcomes.push(Outcome { time: t, event: e }),
                (None, _) => problems.push(format!("row {line}: time `{time_s}` must be a positive number")),
                (_, None) => problems.push(format!("row {line}: event `{event_s}` is not boolean")),
            }
            for (col, &i) in raw.iter_mut().zip(&feature_idx) {
                col.push(rec.get(i).unwrap_or("").to_string());
            }
        }
        if !problems.is_empty() {
            return Err(Error::Dataset(format!("rejected rows: {}", problems.join("; "))));
        }
        if outcomes.is_empty() {
            return Err(Error::EmptyDataset);
        }

        let mut names = Vec::with_capacity(feature_idx.len());
        let mut columns = Vec::with_capacity(feature_idx.len());
        for (values, &i) in raw.into_iter().zip(&feature_idx) {
            let name = header[i].clone();
            let parsed: Vec<Option<f64>> = values
                .iter()
                .map(|v| if is_missing_token(v) { Some(f64::NAN) } else { v.parse().ok() })
                .collect();
            let declared = opts.categorical.as_ref().map(|c| c.contains(&name));
            let categorical = declared.unwrap_or_else(|| parsed.iter().any(Option::is_none));
            let column = if categorical {
                Column::Categorical(
                    values
                        .into_iter()
                        .map(|v| (!is_missing_token(&v)).then_some(v))
                        .collect(),
                )
            } else {
                let nums = parsed
                    .into_iter()
                    .enumerate()
                    .map(|(r, v)| v.ok_or_else(|| Error::Dataset(format!("row {}: `{name}` is not numeric", r + 1))))
                    .collect::<Result<Vec<_>>>()?;
                Column::Numeric(nums)
            };
            names.push(name);
            columns.push(column);
        }
        Self::new(names, columns, outcomes)
    }

    pub fn n_rows(&self) -> usize {
        self.outcomes.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.names
    }

    pub fn outcomes(&self) -> &[Outcome<f64>] {
        &self.outcomes
    }

    pub fn n_events(&self) -> usize {
        self.outcomes.iter().filter(|o| o.event).count()
    }

    pub fn is_categorical(&self, name: &str) -> bool {
        self.names
            .iter()
            .position(|n| n == name)
            .is_some_and(|i| matches!(self.columns[i], Column::Categorical(_)))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            outcomes: rows.iter().map(|&i| self.outcomes[i]).collect(),
        }
    }

    /// Keeps the named covariates, in the order given.
    pub fn select_features<N: AsRef<str>>(&self, names: &[N]) -> Result<Self> {
        let mut out_names = Vec::new();
        let mut out_cols = Vec::new();
        for n in names {
            let n = n.as_ref();
            let i = self
                .names
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| Error::UnknownFeature(n.to_string()))?;
            out_names.push(n.to_string());
            out_cols.push(self.columns[i].clone());
        }
        Self::new(out_names, out_cols, self.outcomes.clone())
    }
}

/// What to do with a category level not seen when the encoder was fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownLevel {
    #[default]
    Error,
    /// Every indicator of the column is zero.
    Zeros,
}

/// All-levels one-hot encoder; indicator columns are named `col=level`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OneHotEncoder {
    levels: BTreeMap<String, Vec<String>>,
}

impl OneHotEncoder {
    /// Learns the sorted level set of every categorical column.
    pub fn fit(data: &Dataset) -> Self {
        let levels = data
            .names
            .iter()
            .zip(&data.columns)
            .filter_map(|(n, c)| match c {
                Column::Categorical(v) => {
                    let set: BTreeSet<&String> = v.iter().flatten().collect();
                    Some((n.clone(), set.into_iter().cloned().collect()))
                }
                Column::Numeric(_) => None,
            })
            .collect();
        Self { levels }
    }

    pub fn levels(&self, column: &str) -> Option<&[String]> {
        self.levels.get(column).map(Vec::as_slice)
    }

    pub fn transform(&self, data: &Dataset, unknown: UnknownLevel) -> Result<Table<f64>> {
        let mut names = Vec::new();
        let mut cols = Vec::new();
        for (name, col) in data.names.iter().zip(&data.columns) {
            match col {
                Column::Numeric(v) => {
                    names.push(name.clone());
                    cols.push(v.clone());
                }
                Column::Categorical(v) => {
                    let levels = self
                        .levels
                        .get(name)
                        .ok_or_else(|| Error::Dataset(format!("encoder has no levels for `{name}`")))?;
                    if unknown == UnknownLevel::Error {
                        if let Some(bad) = v.iter().flatten().find(|x| !levels.contains(x)) {
                            return Err(Error::Dataset(format!("unknown level `{bad}` in `{name}`")));
                        }
                    }
                    for level in levels {
                        names.push(format!("{name}={level}"));
                        cols.push(
                            v.iter()
                                .map(|x| match x {
                                    None => f64::NAN,
                                    Some(x) if x == level => 1.0,
                                    Some(_) => 0.0,
                                })
                                .collect(),
                        );
                    }
                }
            }
        }
        let mut t = Table::new(names, cols)?;
        if t.n_cols() == 0 {
            t = Table::from_rows(Vec::new(), &vec![Vec::new(); data.n_rows()])?;
        }
        Ok(t)
    }
}

/// Fits the encoder on `data` itself and encodes it.
pub fn one_hot(data: &Dataset) -> Result<Table<f64>> {
    OneHotEncoder::fit(data).transform(data, UnknownLevel::Error)
}
