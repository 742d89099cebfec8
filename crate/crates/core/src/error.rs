use thiserror::Error;

/// Errors produced by the `abstain` crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A malformed line in a sparse data file.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("solver error: {0}")]
    Solver(String),

    /// Subgradient training blew up; carries the objective trace summary.
    #[error("training diverged at step {step}: objective {objective} exceeds 10x initial {initial}")]
    Divergence {
        step: usize,
        objective: f64,
        initial: f64,
    },

    /// An internal invariant was breached; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("unsupported model version {0}")]
    Version(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
