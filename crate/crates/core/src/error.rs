use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum FbError {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),

    #[error("enumeration guard exceeded: {needed} states > guard {guard}")]
    Guard { needed: u128, guard: u64 },

    #[error("did not converge after {iters} iterations (gap {gap:e})")]
    NoConvergence { iters: usize, gap: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for FbError {
    fn from(e: serde_json::Error) -> Self {
        FbError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FbError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(FbError::Invalid(msg.into()))
}
