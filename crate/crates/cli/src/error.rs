use std::path::PathBuf;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("degenerate statistics: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Core(#[from] lagcd_core::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 configuration, 3 I/O or malformed files, 4 degenerate statistics,
    /// 1 any other failure.
    pub fn exit_code(&self) -> i32 {
        use lagcd_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Degenerate(_) => 4,
            CliError::Core(e) => match e {
                E::Config(_) | E::Shape(_) => 2,
                E::Io { .. } | E::Format(_) | E::HashMismatch(_) | E::Json(_) => 3,
                E::Degenerate(_) => 4,
                _ => 1,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
