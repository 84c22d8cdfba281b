use thiserror::Error;

/// Errors raised across the simulation and optimization layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("problem is infeasible: minimum achievable constraint value {min_constraint:.6e} exceeds threshold {gamma:.6e}")]
    Infeasible { min_constraint: f64, gamma: f64 },

    #[error("no null-steering solution exists for a {count_x}x{count_y} surface")]
    NoNullAvailable { count_x: usize, count_y: usize },

    #[error("null index ({index_x}, {index_y}) out of range for a {count_x}x{count_y} surface")]
    IndexOutOfRange {
        index_x: usize,
        index_y: usize,
        count_x: usize,
        count_y: usize,
    },

    #[error("exhaustive search over {candidates} candidates exceeds the budget of {budget}")]
    BudgetExceeded { candidates: f64, budget: f64 },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
