//! Error type shared by every module.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("variable {index}: lower bound {lower} exceeds upper bound {upper}")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },

    #[error("quadratic matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("network is disconnected: bus {0} is unreachable from the slack")]
    Disconnected(usize),

    #[error("reduced susceptance matrix is singular")]
    SingularNetwork,

    #[error("row index {index} out of range for {rows} rows")]
    RowIndex { index: usize, rows: usize },

    #[error("polyhedron is empty")]
    EmptyPolyhedron,

    #[error("polyhedron is unbounded along coordinate {0}")]
    UnboundedPolyhedron(usize),

    #[error("dimension {0} exceeds the enumeration limit of {1}")]
    DimensionTooLarge(usize, usize),

    #[error("problem infeasible at theta = {theta:?}")]
    Infeasible { theta: Vec<f64> },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("did not converge after {0} iterations")]
    NotConverged(usize),

    #[error("internal inconsistency: {0}")]
    Internal(String),
}
