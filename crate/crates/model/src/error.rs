use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Core(#[from] sphinv_core::CoreError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at iteration {iteration}: {what} is not finite")]
    Diverged { iteration: usize, what: &'static str },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("graph undefined: {points} points cannot support k = {k} neighbors")]
    GraphUndefined { points: usize, k: usize },
    #[error("mode {mode} requires {missing}")]
    MissingModel { mode: &'static str, missing: &'static str },
    #[error("invalid edit: {0}")]
    Edit(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
