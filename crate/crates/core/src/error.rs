use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: String,
        found: String,
    },

    /// Separation thresholds with a zero denominator, `floor((dim - 1) / 4) == 0`.
    #[error("degenerate separation threshold for an array dimension of {dim} elements")]
    DegenerateSeparation { dim: usize },

    #[error("rejection sampling gave up after {attempts} attempts")]
    SamplingFailed { attempts: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(what: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            what,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
