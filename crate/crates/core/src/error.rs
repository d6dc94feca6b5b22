use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corpus generation failed for {path}: {source}")]
    Generation {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to load {path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("shape mismatch: expected dim {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("id {0} already present in index")]
    DuplicateId(u64),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("channel closed: send after close")]
    ChannelClosed,

    #[error("pipeline stalled for {idle_ms} ms without progress ({diagnostics})")]
    Stalled { idle_ms: u128, diagnostics: String },

    #[error("pipeline invariant violated: {0}")]
    Invariant(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
