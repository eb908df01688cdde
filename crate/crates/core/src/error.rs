use std::fmt;

/// A single violated configuration constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {}", join(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("prefix strategy infeasible: {0}")]
    StrategyInfeasible(String),

    #[error("pulse rate mismatch: {0} vs {1} samples per symbol")]
    RateMismatch(usize, usize),

    #[error("channel response needs sample {index}, before the frame start {frame_start}")]
    IndexOutOfSupport { index: i64, frame_start: i64 },

    #[error("window support [-{found}, M) does not match signal support [-{expected}, M)")]
    SupportMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is not square or tall ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matching pursuit residual increased at iteration {0}")]
    NoConvergence(usize),

    #[error("linear solve failed: {0}")]
    SolveFailure(&'static str),

    #[error("bad length: {0}")]
    BadLength(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
