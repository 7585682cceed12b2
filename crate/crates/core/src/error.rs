use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency {freq} Hz (Nyquist is {nyquist} Hz)")]
    InvalidFrequency { freq: f64, nyquist: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("every epoch was rejected (threshold {threshold})")]
    EmptyEpochSet { threshold: f64 },

    #[error("degenerate spectrum for channels {x}/{y} at {freq} Hz in every epoch")]
    DegenerateSpectrum { x: usize, y: usize, freq: f64 },

    #[error("index error: {0}")]
    Index(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("preselection left an empty candidate pool")]
    EmptyPool,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("feature ids not present in the dataset: {0:?}")]
    UnknownFeatures(Vec<usize>),

    #[error("invalid recording: {0}")]
    Recording(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("sample {sample}: {source}")]
    Sample {
        sample: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at_path(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub fn for_sample(self, sample: impl Into<String>) -> Self {
        Error::Sample {
            sample: sample.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, with file and sample context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::File { source, .. } | Error::Sample { source, .. } => source.root(),
            other => other,
        }
    }
}
