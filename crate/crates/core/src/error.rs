use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("item index {index} out of range for {n} items")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("empty or out-of-range interval [{first}, {last}] for series of length {t_max}")]
    BadInterval {
        first: usize,
        last: usize,
        t_max: usize,
    },

    #[error("comparison graph is disconnected")]
    DisconnectedGraph,

    #[error("solver did not converge after {iterations} iterations (projected gradient norm {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("malformed {what} at line {line}: {reason}")]
    Parse {
        what: &'static str,
        line: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::IndexOutOfRange { .. }
            | Error::BadInterval { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::DisconnectedGraph => 3,
            Error::NonConvergence { .. } => 4,
            Error::NonFinite(_) => 1,
        }
    }
}
