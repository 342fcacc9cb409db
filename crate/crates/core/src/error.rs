use thiserror::Error;

/// Errors raised while configuring or running the solvers.
#[derive(Debug, Error)]
pub enum PfcError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical overflow: {0}")]
    NonFinite(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("line search failed after {backtracks} backtracks (step {step:e}, gradient norm {grad_norm:e})")]
    LineSearch {
        backtracks: usize,
        step: f64,
        grad_norm: f64,
    },

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),

    #[error("snapshot shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("mismatched convergence targets: {0}")]
    MismatchedReports(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PfcError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(PfcError::Config(msg.into()))
}
