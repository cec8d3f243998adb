use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Core(#[from] sphinv_core::CoreError),
    #[error("mesh has zero total area")]
    ZeroArea,
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("face {face} references vertex {index}, mesh has {count}")]
    BadFaceIndex { face: usize, index: i64, count: usize },
    #[error("{path}:{line}: {msg}")]
    Obj { path: PathBuf, line: usize, msg: String },
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    Fraction(f64),
    #[error("need at least 2 items to split, got {0}")]
    TooFewItems(usize),
    #[error("invalid family configuration: {0}")]
    Family(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;
