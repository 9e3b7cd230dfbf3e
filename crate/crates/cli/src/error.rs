use robust_mem::Error as CoreError;
use thiserror::Error;

/// Failures surfaced by the command-line tool, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {pointer}: {reason}")]
    Config { pointer: String, reason: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(pointer: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            pointer: pointer.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidConfig { field, reason } => CliError::Config { pointer: field, reason },
            CoreError::Unsupported { .. } => CliError::config("/method", e.to_string()),
            CoreError::EmptyTable
            | CoreError::RaggedRows { .. }
            | CoreError::NonFinite { .. }
            | CoreError::OutOfRange { .. }
            | CoreError::Shape(_) => CliError::Data(e.to_string()),
            CoreError::RankDeficient
            | CoreError::NonUnique { .. }
            | CoreError::Degenerate { .. }
            | CoreError::NonFiniteLoss { .. }
            | CoreError::ExtrapolationIllConditioned
            | CoreError::TooManyFailures { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
