use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix data length {len} does not match shape {rows}x{cols}")]
    ShapeData { rows: usize, cols: usize, len: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no pairs")]
    NoPairs,

    #[error("no triplets")]
    NoTriplets,

    #[error("need ≥2 classes, got {0}")]
    NeedTwoClasses(usize),

    #[error("malformed K-plet at entry {entry}: expected {expected} negatives, got {got}")]
    MalformedKplet { entry: usize, expected: usize, got: usize },

    #[error("K exceeds available negative classes: K={k}, classes in batch={classes}")]
    KExceedsClasses { k: usize, classes: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("class {class} has {count} samples, need at least {needed}")]
    ClassTooSmall { class: usize, count: usize, needed: usize },

    #[error("non-finite {what} in layer {layer}")]
    NonFinite { what: &'static str, layer: usize },

    #[error("non-finite loss value {0}")]
    NonFiniteLoss(f64),

    #[error("degenerate centroids: classes {0} and {1} coincide")]
    DegenerateCentroids(usize, usize),

    #[error("single class: clustering metrics need at least two")]
    SingleClass,

    #[error("rank-0 data: all points identical")]
    RankZero,

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("empty file: {}", .0.display())]
    EmptyFile(PathBuf),

    #[error("invalid header: {0}")]
    InvalidHeader(String),

    #[error("ragged row at line {line}: expected {expected} fields, got {got}")]
    RaggedRow { line: u64, expected: usize, got: usize },

    #[error("non-numeric cell {value:?} at line {line}, column {column}")]
    NonNumeric { line: u64, column: usize, value: String },

    #[error("unsupported checkpoint: {0}")]
    Checkpoint(String),

    #[error("fold {fold}, {phase}: {source}")]
    Fold {
        fold: usize,
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn in_fold(self, fold: usize, phase: &'static str) -> Error {
        Error::Fold {
            fold,
            phase,
            source: Box::new(self),
        }
    }
}
