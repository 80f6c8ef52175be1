use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("degenerate regressor: {0}")]
    DegenerateRegressor(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("insufficient observations: need more than {needed}, have {have}")]
    InsufficientObservations { needed: usize, have: usize },

    #[error("no valid grid cell: {0}")]
    NoValidCell(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => ErrorCategory::Config,
            Error::Parse { .. }
            | Error::Dimension(_)
            | Error::Validation(_)
            | Error::Alignment(_)
            | Error::MissingArtifact(_)
            | Error::Io { .. } => ErrorCategory::Data,
            Error::DegenerateFit(_)
            | Error::DegenerateRegressor(_)
            | Error::SingularDesign(_)
            | Error::InsufficientObservations { .. }
            | Error::NoValidCell(_) => ErrorCategory::Numeric,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
