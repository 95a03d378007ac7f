use thiserror::Error;

use crate::engine::IterationRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("constraint {index} has degree 0")]
    ConstantConstraint { index: usize },

    #[error("constraint {index} has a nonzero constant term; normalize it to c(x) <= 1 first")]
    ConstantTerm { index: usize },

    #[error("right-hand side of row {row} is {rhs}, expected 1")]
    NonUnitRhs { row: usize, rhs: f64 },

    #[error("origin is not in the interior of the constraint set (constraint {index})")]
    OriginNotInterior { index: usize },

    #[error("state bounds do not enclose the constraint set: {point:?} satisfies all constraints")]
    BoxTooSmall { point: Vec<f64> },

    #[error("system is not certified asymptotically stable: JSR upper bound {upper} at depth {depth}")]
    NotStable { upper: f64, depth: usize },

    #[error("enumeration of {count} products exceeds the budget of {budget}")]
    EnumerationBudget { count: u128, budget: u128 },

    #[error("LP solver failure: {0}")]
    LpFailure(String),

    #[error("SDP solver failure: {0}")]
    SdpFailure(String),

    #[error("no convergence after {max_iter} iterations")]
    NonConvergence {
        max_iter: usize,
        trace: Vec<IterationRecord>,
    },
}
