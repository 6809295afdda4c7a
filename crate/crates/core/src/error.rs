use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Exhaustive enumeration was requested on a volume above the configured cap.
    #[error("volume of {sites} sites exceeds the enumeration cap of {cap}")]
    Capacity { sites: usize, cap: usize },

    #[error("chains did not coalesce within {steps} single-site steps")]
    CoalescenceTimeout { steps: u64 },

    #[error("Dobrushin condition violated: r = {r} >= 1")]
    DobrushinViolated { r: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("trial failed in cell (n = {n}, C = {c}, replication {replication}): {source}")]
    Trial {
        n: u64,
        c: f64,
        replication: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}
