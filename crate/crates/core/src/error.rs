use std::fmt;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("similarity matrix has {} violation(s): {}", .0.len(), ViolationList(.0))]
    Validation(Vec<Violation>),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("unsupported regime: {0}")]
    Unsupported(String),

    #[error("join error: {0}")]
    Join(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }

    pub(crate) fn parse(line: usize, column: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: msg.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_) => 3,
            Error::Io(_) => 4,
            _ => 2,
        }
    }
}

struct ViolationList<'a>(&'a [Violation]);

impl fmt::Display for ViolationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 5;
        for (i, v) in self.0.iter().take(SHOWN).enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        if self.0.len() > SHOWN {
            write!(f, "; ... and {} more", self.0.len() - SHOWN)?;
        }
        Ok(())
    }
}
