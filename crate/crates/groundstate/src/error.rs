use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid of {requested} nodes exceeds the node budget of {budget}")]
    NodeBudget { requested: usize, budget: usize },

    #[error("domain has no interior nodes")]
    EmptyDomain,

    #[error("field is identically zero")]
    ZeroField,

    #[error("configuration error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConverged { residual: f64, iterations: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
