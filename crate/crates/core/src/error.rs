use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty cohort")]
    EmptyCohort,
    #[error("invalid survival time {0}: must be positive and finite")]
    InvalidTime(String),
    #[error("degenerate split: both groups must be non-empty")]
    DegenerateSplit,
    #[error("no comparable pairs")]
    NoComparablePairs,
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("no usable features")]
    NoUsableFeatures,
    #[error("feature `{0}` contains missing values")]
    PartialMissing(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("incompatible row: tree from site `{site}` needs feature `{feature}`")]
    IncompatibleRow { site: String, feature: String },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("OOB requires bootstrap")]
    OobRequiresBootstrap,
    #[error("no OOB rows")]
    NoOobRows,
    #[error("survival function unavailable in low-memory mode")]
    LowMemory,
    #[error("invalid tree document: {0}")]
    InvalidTree(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("column not in schema: `{0}`")]
    ColumnNotInSchema(String),
    #[error("unknown client `{0}`")]
    UnknownClient(String),
    #[error("unaligned models: feature_order differs between `{0}` and `{1}`")]
    UnalignedModels(String, String),
    #[error("incompatible tree from site `{site}` offered to `{target}` (feature `{feature}`)")]
    IncompatibleTree {
        site: String,
        target: String,
        feature: String,
    },
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("no features left")]
    NoFeaturesLeft,
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Dataset(e.to_string())
    }
}
