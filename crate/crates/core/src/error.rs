use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    Space(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gp fit failed: {0}")]
    GpFit(String),

    #[error("rank-deficient design matrix at column {column} (`{name}`)")]
    RankDeficient { column: usize, name: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("journal error: {0}")]
    Journal(String),

    #[error("empty feasible set: {0}")]
    EmptyFeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Coarse category used by the CLI to map failures onto exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config { .. } | Error::Space(_) => "config",
            Error::Data(_) | Error::Journal(_) | Error::OutOfBounds(_) | Error::Io(_) => "data",
            Error::GpFit(_) | Error::RankDeficient { .. } | Error::EmptyFeasible(_) => "model",
            Error::DimensionMismatch { .. } => "data",
        }
    }
}
