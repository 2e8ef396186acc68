use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a model invariant. `key` is the dotted
    /// path of the offending entry as it appears in the config file.
    #[error("invalid config `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("infeasible decision: {0}")]
    InfeasibleDecision(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("state space has {states} states, above the enumeration cap of {cap}")]
    StateSpaceTooLarge { states: usize, cap: usize },

    #[error("table shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
