use thiserror::Error;

#[derive(Debug, Error)]
pub enum FqcpError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("site index {index} out of range for a chain of {len} sites")]
    Index { index: usize, len: usize },
    #[error("superoperator compression residual {residual:e} above floor {floor:e}")]
    Compression { residual: f64, floor: f64 },
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("schema mismatch in {path}: expected `{expected}`, found `{found}`")]
    Schema {
        path: String,
        expected: String,
        found: String,
    },
    #[error("refusing to overwrite existing {0} (use --force)")]
    Overwrite(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FqcpError>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(FqcpError::Config(msg.into()))
}
