use thiserror::Error;

use crate::solvers::SolveStatus;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("rank deficient: column {column} has residual norm {norm:.3e}")]
    RankDeficient { column: usize, norm: f64 },

    #[error("feasible set is empty")]
    InfeasibleSet,

    #[error("dimension {n} exceeds the vertex enumeration limit {max}")]
    DimensionTooLarge { n: usize, max: usize },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("matrix is not symmetric positive semidefinite")]
    NotPositiveSemidefinite,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("solver stopped with status {status:?} after {pivots} pivots")]
    SolverFailure { status: SolveStatus, pivots: usize },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
