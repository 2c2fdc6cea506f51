use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum TadError {
    /// A row of an input file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Inputs violate a documented precondition or invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// The request is well-formed but cannot be computed (unequal task
    /// sizes for the approximate distance, enumeration over the cap).
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl TadError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        TadError::Validation(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        TadError::Infeasible(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        TadError::Parse {
            line,
            message: msg.into(),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            TadError::Parse { .. } | TadError::Validation(_) => 2,
            TadError::Infeasible(_) => 3,
            TadError::Io(_) | TadError::Json(_) | TadError::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, TadError>;
