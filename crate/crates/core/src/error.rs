use thiserror::Error;

use crate::linalg::Point;

/// Errors raised by the geometric primitives, the solvers and the file layer.
#[derive(Debug, Error)]
pub enum QeqError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("region is empty")]
    EmptyRegion,

    #[error("projection did not converge after {iterations} cycles (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("lattice of {count} candidate points exceeds the limit of {limit}")]
    ExplosionGuard { count: f64, limit: usize },

    #[error("inner map value is not contained in the outer value at {witness:?}")]
    InclusionViolated { witness: Point },

    #[error("constraint set of player {player} is empty")]
    EmptyConstraint { player: usize },

    #[error("no fixed point of the restricted map was found on the grid")]
    EmptyFixedPointSet,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = QeqError> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(QeqError::DimensionMismatch { expected, found })
    }
}
