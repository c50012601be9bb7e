use std::io;
use std::path::PathBuf;

use bmslab_core::Error as CoreError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed command line or an argument that fails validation.
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("cannot read `{}`: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write `{}`: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
}

impl CliError {
    /// Process exit code: 2 for configuration and usage problems, 3 for
    /// numeric trouble, 4 when two computations that must agree do not.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Read { .. } | CliError::Write { .. } => 2,
            CliError::Core(e) => match e {
                CoreError::Config { .. } => 2,
                CoreError::Degenerate { .. } | CoreError::Numeric(_) | CoreError::Accuracy { .. } => 3,
                CoreError::Inconsistency(_) => 4,
            },
        }
    }
}

pub(crate) fn config_error(key: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Core(CoreError::Config {
        key: key.into(),
        message: message.into(),
    })
}
