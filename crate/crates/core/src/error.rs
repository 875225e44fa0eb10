use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violated an operation precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Configuration failed validation; `field` is the dotted path.
    #[error("invalid config field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    /// The sign bracket for the λ search could not be established.
    #[error("could not bracket the root of J(λ): {0}")]
    Bracket(String),

    #[error("value iteration did not converge within {iterations} iterations (last sup diff {last_diff:e})")]
    NotConverged { iterations: usize, last_diff: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
