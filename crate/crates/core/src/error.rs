use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("{path}: row {row}: {message}")]
    MalformedRow {
        path: String,
        row: usize,
        message: String,
    },

    #[error("duplicate coda_id `{0}`")]
    DuplicateCoda(String),

    #[error("invalid overlap matrix: {0}")]
    InvalidOverlap(String),

    #[error("invalid interval {0}: must be finite and > 0")]
    InvalidInterval(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing annotation: {0}")]
    MissingAnnotation(String),

    #[error("alphabet mismatch: {0} vs {1}")]
    AlphabetMismatch(usize, usize),

    #[error("symbol {symbol} outside alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },

    #[error("`{context:?}` is not the parent of `{child:?}`")]
    NotParent {
        child: Vec<u16>,
        context: Vec<u16>,
    },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("generation exceeded {0} symbols without emitting the end symbol")]
    GenerationCap(usize),

    #[error("matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),

    #[error("cluster count {k} out of range 1..={n}")]
    ClusterCount { k: usize, n: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),

    #[error("degenerate resample: {0} consecutive draws had constant x")]
    DegenerateResample(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
