use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty shape: {0}")]
    EmptyShape(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("phantom truncated by grid: {0}")]
    TruncatedPhantom(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("incomplete series: {0}")]
    IncompleteSeries(String),

    #[error("instant {t_idx} outside the reconstructable band [{lo}, {hi}]")]
    OutOfBand { t_idx: usize, lo: usize, hi: usize },

    #[error("mask does not meet the intersection line of planes {i} and {j}")]
    NoIntersection { i: usize, j: usize },

    #[error("fused propagation collapsed to an empty mask at index {0}")]
    PropagationCollapse(usize),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("registration aborted: {0}")]
    RegistrationAborted(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
