use thiserror::Error;

/// Errors produced by the estimation and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    Input(String),

    /// A chain produced a non-finite state; `update` names the Gibbs block.
    #[error("chain diverged in {update} at sweep {sweep}: {detail}")]
    Divergence {
        update: &'static str,
        sweep: usize,
        detail: String,
    },

    #[error("degenerate density: {0}")]
    Degenerate(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
