use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("batch of {rows} row(s) cannot be normalized in training mode")]
    DegenerateBatch { rows: usize },

    #[error("training diverged: {0}")]
    Training(String),

    #[error("{kind} id {id} out of range 1..={max}")]
    Lookup {
        kind: &'static str,
        id: u32,
        max: usize,
    },

    #[error("corrupt artifact {path}: {message}")]
    Integrity { path: PathBuf, message: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("input not found: {0}")]
    MissingInput(PathBuf),

    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn shape(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Process exit status for the command-line front end.
    ///
    /// 2 usage, 3 validation, 4 numeric/training failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingInput(_) | Error::Config(_) => 2,
            Error::Parameter(_)
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::Lookup { .. }
            | Error::Integrity { .. }
            | Error::Evaluation(_)
            | Error::Report(_)
            | Error::Shape { .. }
            | Error::Locked(_) => 3,
            Error::Training(_) | Error::DegenerateBatch { .. } => 4,
            Error::Io { .. } => 1,
        }
    }
}
