use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("quadrature did not converge on [{lo}, {hi}] for {what} (estimated error {error:e})")]
    Quadrature {
        what: String,
        lo: f64,
        hi: f64,
        error: f64,
    },

    #[error("dominating intensity violated: intensity({t}) = {value} > lambda_max = {lambda_max}")]
    DominationViolated { t: f64, value: f64, lambda_max: f64 },

    #[error("Poisson series needs more than {max_terms} terms (lambda = {lambda})")]
    SeriesTooLong { lambda: f64, max_terms: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("config error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user input rather than numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::InvalidParameter { .. }
                | Error::LengthMismatch { .. }
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}
