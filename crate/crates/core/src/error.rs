use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index {index} out of range for {len} variables")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("series too short: {len} rows, need more than {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("non-finite value at step {step}, variable {var}")]
    NonFinite { step: usize, var: usize },

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("singular design matrix: {0}")]
    Singular(String),

    #[error("scorer failed on {failed} of {total} bootstrap resamples: {last}")]
    Bootstrap { failed: usize, total: usize, last: String },

    #[error("training diverged at epoch {epoch} (batch seed {batch_seed:#018x})")]
    Diverged { epoch: usize, batch_seed: u64 },

    #[error("malformed container: {0}")]
    Format(String),

    #[error("content hash mismatch in {0}")]
    HashMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
