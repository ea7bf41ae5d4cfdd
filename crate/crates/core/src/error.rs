use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {time} is before the first sample ({first}) of the {instance_type} price trace")]
    OutOfRange {
        instance_type: String,
        time: f64,
        first: f64,
    },

    #[error("unknown instance type `{0}`")]
    UnknownType(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("operation not valid in {0} mode")]
    Mode(&'static str),

    #[error("invalid move: {0}")]
    InvalidMove(String),

    #[error("truthful bid undefined: group of type `{0}` needs no instances")]
    UndefinedBid(String),

    #[error("spot bid of {bid} for `{instance_type}` does not exceed market price {market}")]
    BidRejected {
        instance_type: String,
        bid: f64,
        market: f64,
    },

    #[error("{}:{line}: {message}", path.display())]
    Validation {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Trace(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad inputs rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
