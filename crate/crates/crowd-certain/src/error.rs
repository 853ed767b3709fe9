use std::path::PathBuf;

/// Errors produced by dataset ingestion, simulation, aggregation, and the
/// benchmark harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dataset file not found: {0}")]
    MissingFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),

    #[error("dataset {name:?} is empty")]
    EmptyDataset { name: String },

    #[error("row {row}, column {column:?}: expected a finite number, got {value:?}")]
    BadFeature {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, label column {column:?}: value {value:?} is not 0/1 and no positive-class mapping was given")]
    BadLabel {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column {0:?} not present in header")]
    MissingColumn(String),

    #[error("invalid fold request: k={k}, n={n} (need k >= 2 and n >= k)")]
    BadFolds { n: usize, k: usize },

    #[error("invalid threshold range [{lo}, {hi}] (need 0 <= lo < hi <= 1)")]
    BadThresholdRange { lo: f64, hi: f64 },

    #[error("worker count must be at least {min}, got {got}")]
    TooFewWorkers { min: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown bundled dataset {0:?}")]
    UnknownDataset(String),

    #[error("unknown method {0:?}")]
    UnknownMethod(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
