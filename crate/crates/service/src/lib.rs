//! HTTP JSON API over the inversion and editing pipeline. Each session holds
//! one normalized target, at most one inversion result and an edit stack that
//! is replayed from the result's codes on every change.

pub mod error;
pub mod routes;
pub mod state;

pub use error::{ApiError, ApiResult};
pub use routes::router;
pub use state::{AppState, JobStatus, ModelSnapshot, Session};
