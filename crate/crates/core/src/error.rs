use thiserror::Error;

use crate::lattice::LatticePoint;

#[derive(Debug, Error)]
pub enum SandpileError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("illegal toppling at {point}: height {height} is below the required {required}")]
    IllegalTopple {
        point: LatticePoint,
        height: u64,
        required: u64,
    },

    #[error("invalid radii: r1 = {r1} exceeds r2 = {r2}")]
    InvalidRadii { r1: u64, r2: u64 },

    #[error(
        "background {background} is unstable in dimension {dim}; infinitely many cells are active"
    )]
    UnstableBackground { background: u64, dim: usize },

    #[error("toppling budget exhausted after {topplings} topplings")]
    BudgetExhausted { topplings: u64 },

    #[error("operation requires dimension {required}, got {found}")]
    UnsupportedDimension { required: usize, found: usize },

    #[error("scaling fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SandpileError> = std::result::Result<T, E>;
