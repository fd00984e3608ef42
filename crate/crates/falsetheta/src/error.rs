use thiserror::Error;

/// Failures surfaced by library operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("coefficient at exponent {exponent} lies beyond the truncation bound {bound}")]
    Truncated { exponent: String, bound: String },

    #[error("check failed: {0}")]
    Check(String),

    #[error("{what} did not converge (achieved {achieved:.3e})")]
    NonConvergence { what: String, achieved: f64 },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid(_) | Error::Truncated { .. } => 2,
            Error::Check(_) => 3,
            Error::NonConvergence { .. } => 4,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn check(msg: impl Into<String>) -> Self {
        Error::Check(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
