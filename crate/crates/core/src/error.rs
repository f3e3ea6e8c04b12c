use thiserror::Error;

use crate::transform::ExtendedState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("ellipsoid semiaxes must be finite and strictly positive")]
    InvalidSemiaxes,

    #[error("support direction must be nonzero")]
    ZeroDirection,

    #[error("invalid communication graph: {0}")]
    InvalidGraph(String),

    #[error("polytope needs at least {min} vertices, got {got}")]
    TooFewVertices { min: usize, got: usize },

    #[error("degenerate polytope: {0}")]
    DegeneratePolytope(String),

    #[error("polytope has no facets")]
    EmptyPolytope,

    #[error("{samples} boundary samples is below the minimum of {min} for this polytope")]
    Undersampled { samples: usize, min: usize },

    #[error("invalid budget split: {0}")]
    InvalidBudgetSplit(String),

    #[error("projection did not converge in {iterations} iterations (residual {residual:e})")]
    ProjectionNotConverged { iterations: usize, residual: f64 },

    #[error("dynamics diverged at t = {time}: |y| = {norm:e}")]
    Diverged {
        time: f64,
        norm: f64,
        state: Box<ExtendedState>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Config(#[from] crate::harness::ConfigError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
