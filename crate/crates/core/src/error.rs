use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Frame geometry is invalid or two objects disagree on it.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input carries no energy (all-zero data, zero root, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("polynomial rooting did not converge (degree {})", .coeffs.len().saturating_sub(1))]
    RootNonConvergence { coeffs: Vec<Complex64> },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
