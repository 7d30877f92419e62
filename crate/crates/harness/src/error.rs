use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] korteweg_core::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot: bad magic {0:?}")]
    SnapshotMagic([u8; 8]),

    #[error("snapshot: unsupported version {0}")]
    SnapshotVersion(u32),

    #[error("snapshot: truncated while reading {0}")]
    SnapshotTruncated(&'static str),

    #[error("snapshot: grid {found:?} does not match target {expected:?}")]
    SnapshotGrid { expected: Vec<usize>, found: Vec<usize> },

    #[error("snapshot: {0}")]
    SnapshotFormat(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
