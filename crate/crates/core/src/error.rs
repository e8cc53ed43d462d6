use thiserror::Error;

/// Errors produced while building, assembling or certifying a problem.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("layout mismatch: expected {expected} variables, got {found}")]
    Layout { expected: usize, found: usize },

    #[error("invalid block layout: {0}")]
    InvalidLayout(String),

    #[error("X-Z coupling in monomial {monomial}")]
    Coupling { monomial: String },

    #[error("constraint {name} is not supported on the {block} block")]
    BlockViolation { name: String, block: String },

    #[error("moment {index} is outside the truncation")]
    Truncation { index: String },

    #[error("relaxation order {order} is below the minimum admissible order {min}")]
    Order { order: u32, min: u32 },

    #[error("{count} constraints give 2^{count} subset products, above the capacity guard of {limit}; use the putinar-sparse variant")]
    Capacity { count: usize, limit: usize },

    #[error("variant requires product mode (every g_j supported on X only)")]
    Mode,

    #[error("Krivine relaxation requires constraints normalized to 0 <= g <= 1 on K")]
    NormalizationRequired,

    #[error("invalid normalization bound {0}: must be positive")]
    Bound(String),

    #[error("grid oracle has no feasible point")]
    EmptyFeasible,

    #[error("grid oracle would evaluate {points} points, above the guard of {limit}")]
    GridCapacity { points: u128, limit: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("certificate extraction failed: {0}")]
    Extraction(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("solver did not reach optimality: {0}")]
    Solver(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
