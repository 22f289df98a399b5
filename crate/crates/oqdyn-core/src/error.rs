//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by operator algebra, projections, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("operator is not Hermitian: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NonHermitian { defect: f64, tol: f64 },

    #[error("invalid Hilbert space: {0}")]
    InvalidSpace(String),

    #[error("not a valid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid projection: {0}")]
    InvalidProjection(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dense representation unavailable: operator dimension {dim} exceeds cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("quadrature cost cap exceeded: {steps} steps per axis (cap {cap})")]
    CostCapExceeded { steps: usize, cap: usize },

    #[error("solver aborted at step {step} (t = {time}): {reason}")]
    SolverAbort {
        step: usize,
        time: f64,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
