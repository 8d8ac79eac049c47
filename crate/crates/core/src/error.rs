use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path}: non-numeric cell {value:?} at row {row}, column {column}")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: usize,
        value: String,
    },

    #[error("{path}: file contains no data rows")]
    EmptyFile { path: PathBuf },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("column {label:?} (index {index}) has zero variance")]
    ZeroVariance { index: usize, label: String },

    #[error("input is not standardized: {0}")]
    NotStandardized(String),

    #[error("equiangular system is singular for active set {active:?}")]
    RankDeficient { active: Vec<usize> },

    #[error("random experiment {experiment}: {source}")]
    Experiment {
        experiment: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dummy coefficient pool is empty; use the ordinary selector instead")]
    EmptyDummyPool,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
