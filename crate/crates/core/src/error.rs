use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of an operation (age outside the
    /// horizon, exit rate of the absorbing state, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent input data, anchored to a line of its source.
    #[error("{}", fmt_validation(.source_name, *.line, .message))]
    Validation {
        source_name: String,
        line: Option<u64>,
        kind: ValidationKind,
        message: String,
    },

    /// A computation that is well-formed but not defined for the given
    /// inputs, e.g. a confidence interval for a cell without exposure.
    #[error("refused: {0}")]
    Refused(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Category of an input validation failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationKind {
    Header,
    Syntax,
    DuplicatePerson,
    UnknownPerson,
    NonMonotoneEvents,
    InadmissibleTransition,
    EventOutsideWindow,
    EventAfterDeath,
    DeadAtEntry,
    ExitAge,
    Config,
}

fn fmt_validation(source_name: &str, line: Option<u64>, message: &str) -> String {
    match line {
        Some(line) => format!("{source_name}:{line}: {message}"),
        None => format!("{source_name}: {message}"),
    }
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn refused(msg: impl Into<String>) -> Self {
        Error::Refused(msg.into())
    }

    pub fn validation(
        source_name: impl Into<String>,
        line: Option<u64>,
        kind: ValidationKind,
        msg: impl Into<String>,
    ) -> Self {
        Error::Validation {
            source_name: source_name.into(),
            line,
            kind,
            message: msg.into(),
        }
    }

    pub fn validation_kind(&self) -> Option<ValidationKind> {
        match self {
            Error::Validation { kind, .. } => Some(*kind),
            _ => None,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
