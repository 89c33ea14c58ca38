use std::path::PathBuf;

/// Errors produced by the model, fitting, optimizer, and file-format layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid batch plan: {0}")]
    InvalidPlan(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("no interior optimum: {0}")]
    NoInteriorOptimum(&'static str),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no feasible batch size: {0}")]
    EmptyFeasibleSet(String),

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}
