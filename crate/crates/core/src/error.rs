use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("no rows")]
    NoRows,

    #[error("row {row}: expected {expected} columns, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}: feature `{feature}` value `{value}` is not a number")]
    NotANumber {
        row: usize,
        feature: String,
        value: String,
    },

    #[error("feature `{feature}`: unknown category `{value}`")]
    UnknownCategory { feature: String, value: String },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("class {class} has {count} samples, fewer than {parts} partitions")]
    TooFewSamples {
        class: usize,
        count: usize,
        parts: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("schema declares no primary group")]
    NoPrimaryGroup,

    #[error("row {0} has no active primary feature")]
    NoActivePrimary(usize),

    #[error("feature {0} is not permitted under any primary feature")]
    UnconstrainedFeature(usize),

    #[error("input violates constraints: {0}")]
    InvalidInput(String),

    #[error("mixed target classes in result stream: {0} and {1}")]
    MixedTargets(usize, usize),

    #[error("requested {requested} sketch features but histogram has only {available} nonzero entries")]
    SketchTooLong { requested: usize, available: usize },

    #[error("{0} application inputs also contributed to the histogram")]
    Overlap(usize),

    #[error("empty adversarial set")]
    EmptySet,

    #[error("dataset has a single class")]
    SingleClass,

    #[error("unsupported format version {0}")]
    Version(u32),

    #[error("inconsistent metadata: {0}")]
    Metadata(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
