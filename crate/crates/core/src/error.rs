use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("strategy count {required} exceeds the cap of {cap}")]
    CapExceeded { required: u128, cap: u64 },

    #[error("invalid state: {0}")]
    State(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("density matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("density matrix trace is {0}, expected 1")]
    Trace(f64),

    #[error("density matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("excessive solver failures: {failures} of {trials} trials")]
    ExcessiveFailures { failures: u64, trials: u64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
