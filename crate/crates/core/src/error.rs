use thiserror::Error;

/// Errors raised by the library.
///
/// Each variant maps onto one of the stable process exit codes used by the
/// command-line front end (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("length {0} is not a power of two >= 2")]
    NotDyadic(usize),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("level {level} out of range [{min}, {max}]")]
    LevelOutOfRange { level: usize, min: usize, max: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("noise without finite variance: {0}")]
    InfiniteVariance(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("runtime budget of {0} s exceeded")]
    BudgetExceeded(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 data error, 3 config error, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotDyadic(_)
            | Error::NonFinite(_)
            | Error::Shape(_)
            | Error::Parse { .. }
            | Error::Io(_) => 2,
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::LevelOutOfRange { .. }
            | Error::Hypothesis(_)
            | Error::InfiniteVariance(_) => 3,
            Error::Numerical(_) | Error::BudgetExceeded(_) => 4,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
