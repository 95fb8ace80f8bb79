use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {gap:e}")]
    AsymmetricInput { row: usize, col: usize, gap: f64 },

    #[error("eigensolver did not converge (max residual {max_residual:e})")]
    NoConvergence { max_residual: f64 },

    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("non-finite loss at {stage} epoch {epoch}")]
    NonFiniteLoss { stage: &'static str, epoch: usize },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("label sequences differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("label {label} at index {index} is outside [0, {k})")]
    BadLabel { index: usize, label: i64, k: usize },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::NoConvergence { .. }
                | Error::NonFiniteGradient { .. }
                | Error::NonFiniteLoss { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
