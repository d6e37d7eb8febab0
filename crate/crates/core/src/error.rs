use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or truncated file content; `offset` is the byte position
    /// where parsing gave up.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("value {value} at band {band}, pixel ({row}, {col}) is out of range for {format}")]
    Range {
        format: &'static str,
        band: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("band {band} is not a valid tree input: {reason}")]
    InvalidBand { band: usize, reason: String },

    #[error("extent mismatch: expected {expected:?}, found {found:?}")]
    ExtentMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An error raised inside a named pipeline stage.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Validation-class errors map to CLI exit code 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_validation(),
            _ => matches!(
                self,
                Error::Validation(_)
                    | Error::ExtentMismatch { .. }
                    | Error::DimensionMismatch { .. }
                    | Error::Unsupported(_)
            ),
        }
    }
}
