//! Sparse symmetric positive-definite linear algebra shared by the RVE and
//! chip-scale solvers.

mod cg;
mod sparse;

pub use cg::{cg_solve, cg_solve_default, SolveReport, DEFAULT_TOLERANCE};
pub use sparse::{apply_dirichlet, CsrMatrix, TripletBuilder};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("unknown {index} fixed to conflicting values {first} and {second}")]
    ConflictingDirichlet { index: usize, first: f64, second: f64 },
    #[error("non-positive diagonal entry {value} at row {row}")]
    NonPositiveDiagonal { row: usize, value: f64 },
    #[error("right-hand side is not finite")]
    NonFiniteRhs,
}
