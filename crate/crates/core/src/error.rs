use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("non-finite coordinate at row {row}")]
    NonFinite { row: usize },
    #[error("expected {expected} columns, got {got}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cardinality mismatch: {left} vs {right} points")]
    Cardinality { left: usize, right: usize },
    #[error("sphere prior needs at least one point")]
    ZeroPoints,
    #[error("degenerate cloud: all points coincide, cannot normalize")]
    DegenerateScale,
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("malformed {format} data: {msg}")]
    Format { format: &'static str, msg: String },
    #[error("unsupported file extension: {0}")]
    UnsupportedExtension(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
