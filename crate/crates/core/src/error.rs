use thiserror::Error;

use crate::radial::NewtonReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("singular matrix: pivot {pivot} vanished at row {row}")]
    Singular { row: usize, pivot: f64 },

    #[error("newton failed after {} iterations (residual {:.3e})", .report.iterations, .report.final_residual)]
    NoConvergence { report: NewtonReport },

    #[error("point {r} outside grid span [{a}, {b}]")]
    OutOfSpan { r: f64, a: f64, b: f64 },

    #[error("shooting failed: {0}")]
    Shooting(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("gate failed: {0}")]
    Gate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
