use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller-supplied arguments violate an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Tensor or sequence shapes disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A layer, position or index lies outside the valid range.
    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    /// Data is geometrically degenerate for the requested estimator.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at step {step}: loss = {loss}")]
    Divergence { step: usize, loss: f64 },

    /// Invalid or inconsistent run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Config(_) | Error::Json(_) => 2,
            Error::Degenerate(_) | Error::Divergence { .. } => 3,
            Error::Shape(_) | Error::OutOfBounds(_) => 2,
            Error::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
