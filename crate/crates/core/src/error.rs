use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root solver failed: {0}")]
    Solver(String),

    #[error("fit failed: {reason} (last iterate {last_iterate:?})")]
    Fit {
        reason: String,
        last_iterate: Vec<f64>,
    },

    #[error("level identification failed: {0}")]
    Oracle(String),

    #[error("Fock truncation too small: top-level occupation {occupation:.3e} at dim {dim}")]
    Truncation { dim: usize, occupation: f64 },

    #[error("integration failed at t = {time:.6e} s: {reason}")]
    Integration { time: f64, reason: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
