//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by state representations, channel construction, control
/// synthesis, and simulation.
#[derive(Debug, Error)]
pub enum QppError {
    #[error("invalid dimension {0}: need d >= 2")]
    InvalidDimension(usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),

    #[error("coordinates leave the state space (min eigenvalue {0:.3e})")]
    PositivityViolation(f64),

    #[error("invalid Lindblad operator: {0}")]
    InvalidLindbladOperator(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid reference state: {0}")]
    InvalidReference(String),

    #[error("gradient undefined at this state")]
    GradientUndefined,

    #[error("breakdown point: {0}")]
    BreakdownPoint(String),

    #[error("not a stable point (residual {0:.3e})")]
    NotAStablePoint(f64),

    #[error("trajectory is not realizable: {0}")]
    NotRealizable(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("integration failure at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("outside domain: {0}")]
    OutsideDomain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, QppError>;
