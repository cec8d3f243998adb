use std::path::Path as FsPath;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use sphinv_core::io::{encode_native_cloud, parse_pointcloud, write_ply, CloudFormat, NativeCloud, PlyEncoding};
use sphinv_core::PointCloud;
use sphinv_model::editing::{correspondence_colors, EditOperation};
use sphinv_model::inversion::{invert_with_progress, AblationMode, InversionConfig};

use crate::error::{ApiError, ApiResult};
use crate::state::{AppState, JobStatus, Session};

pub const OPENAPI: &str = include_str!("../openapi.json");

/// Upper bound on a request's Step-3 iteration override.
pub const MAX_STEP3_ITERATIONS: usize = 100_000;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/openapi.json", get(openapi))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info).delete(delete_session))
        .route("/sessions/{id}/invert", post(start_inversion))
        .route("/sessions/{id}/status", get(status))
        .route("/sessions/{id}/edits", post(push_edit))
        .route("/sessions/{id}/edits/last", delete(pop_edit))
        .route("/sessions/{id}/cloud", get(cloud))
        .layer(DefaultBodyLimit::max(16 << 20))
        .with_state(state)
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let modes: Vec<AblationMode> = AblationMode::ALL.into_iter().filter(|&m| state.snapshot.serves(m)).collect();
    Json(serde_json::json!({
        "status": "ok",
        "num_points": state.snapshot.num_points,
        "modes": modes,
        "sessions": state.len(),
    }))
}

async fn openapi() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], OPENAPI)
}

#[derive(Serialize)]
struct Created {
    session_id: String,
    num_points: usize,
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Created>)> {
    let format = CloudFormat::sniff(&body);
    let cloud = parse_pointcloud(&body, format, FsPath::new("request body"))
        .map_err(|e| ApiError::BadRequest(format!("malformed point cloud: {e}")))?;
    let n = state.snapshot.num_points;
    if cloud.len() != n {
        return Err(ApiError::Unprocessable(format!(
            "the cloud has {} points, the loaded model expects {n}",
            cloud.len()
        )));
    }
    let (target, transform) = cloud.normalize().map_err(|e| ApiError::BadRequest(format!("cannot normalize: {e}")))?;
    let id = state.insert(Session::new(target, transform))?;
    Ok((StatusCode::CREATED, Json(Created { session_id: id, num_points: n })))
}

async fn session_info(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    let handle = state.get(&id)?;
    let s = handle.lock().expect("session poisoned");
    Ok(Json(serde_json::json!({
        "session_id": id,
        "num_points": s.target.len(),
        "status": s.status,
        "edits": s.edits,
    })))
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    state.remove(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvertRequest {
    pub mode: Option<AblationMode>,
    pub step3_iterations: Option<usize>,
    pub seed: Option<u64>,
}

async fn start_inversion(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<JobStatus>)> {
    let req: InvertRequest = if body.iter().all(u8::is_ascii_whitespace) {
        InvertRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("invalid invert request: {e}")))?
    };
    let handle = state.get(&id)?;
    let snapshot = state.snapshot.clone();
    let mode = req.mode.unwrap_or(AblationMode::Full);
    if !snapshot.serves(mode) {
        return Err(ApiError::BadRequest(format!("the loaded checkpoint cannot serve mode {mode}")));
    }
    let mut cfg = InversionConfig { ablation_mode: mode, ..snapshot.defaults.clone() };
    if let Some(it) = req.step3_iterations {
        if it > MAX_STEP3_ITERATIONS {
            return Err(ApiError::BadRequest(format!("step3_iterations must be at most {MAX_STEP3_ITERATIONS}")));
        }
        cfg.step3_iterations = it;
    }
    if let Some(seed) = req.seed {
        cfg.seed = seed;
    }
    let target = {
        let mut s = handle.lock().expect("session poisoned");
        if s.status.in_flight() {
            return Err(ApiError::Conflict("an inversion is already running in this session".into()));
        }
        s.status = JobStatus::Pending { mode };
        s.target.clone()
    };
    let workers = state.workers.clone();
    let job = handle.clone();
    tokio::spawn(async move {
        let Ok(_permit) = workers.acquire_owned().await else { return };
        let run = tokio::task::spawn_blocking(move || {
            let total = if mode.uses_step3() { cfg.step3_iterations } else { 0 };
            job.lock().expect("session poisoned").status =
                JobStatus::Running { mode, iteration: 0, total, loss: None, best: None };
            let result = invert_with_progress(&target, &snapshot.models, &cfg, |p| {
                job.lock().expect("session poisoned").status = JobStatus::Running {
                    mode,
                    iteration: p.iteration,
                    total: p.total,
                    loss: Some(p.loss),
                    best: Some(p.best),
                };
            });
            let mut s = job.lock().expect("session poisoned");
            match result {
                Ok(r) => {
                    s.status = JobStatus::Done {
                        mode,
                        initial_cd: r.initial_loss,
                        final_cd: r.final_loss,
                        iterations: r.loss_history.len().saturating_sub(1),
                    };
                    s.install_result(r);
                }
                Err(e) => s.status = JobStatus::Failed { mode, error: e.to_string() },
            }
        });
        if let Err(e) = run.await {
            log::error!("inversion task panicked: {e}");
        }
    });
    Ok((StatusCode::ACCEPTED, Json(JobStatus::Pending { mode })))
}

async fn status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<JobStatus>> {
    let handle = state.get(&id)?;
    let s = handle.lock().expect("session poisoned");
    Ok(Json(s.status.clone()))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CloudJson {
    pub which: String,
    pub num_points: usize,
    pub positions: Vec<[f64; 3]>,
    /// Per-point RGB in `[0, 1]` from the prior position; absent for the target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub colors: Option<Vec<[f64; 3]>>,
    /// Prior index of every row; rows are prior-aligned, so this is `0..N`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correspondence: Option<Vec<usize>>,
}

fn rows(a: &ndarray::Array2<f64>) -> Vec<[f64; 3]> {
    a.outer_iter().map(|r| [r[0], r[1], r[2]]).collect()
}

#[derive(Clone, Copy, PartialEq)]
enum Which {
    Target,
    Recon,
    Edited,
}

impl Which {
    fn parse(s: &str) -> ApiResult<Self> {
        match s {
            "target" => Ok(Self::Target),
            "recon" => Ok(Self::Recon),
            "edited" => Ok(Self::Edited),
            other => Err(ApiError::BadRequest(format!("unknown cloud `{other}`; use target, recon or edited"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Target => "target",
            Self::Recon => "recon",
            Self::Edited => "edited",
        }
    }
}

/// The requested cloud plus correspondence colors when it is prior-aligned.
fn select(s: &Session, which: Which) -> ApiResult<(PointCloud, Option<ndarray::Array2<f64>>)> {
    let missing = || ApiError::NotFound(format!("no {} cloud yet; run an inversion first", which.name()));
    match which {
        Which::Target => Ok((s.target.clone(), None)),
        Which::Recon | Which::Edited => {
            let result = s.result.as_ref().ok_or_else(missing)?;
            let cloud = if which == Which::Recon {
                result.reconstruction.clone()
            } else {
                s.edited.clone().ok_or_else(missing)?
            };
            Ok((cloud, Some(correspondence_colors(result.generator.sphere()))))
        }
    }
}

fn cloud_json(which: Which, cloud: &PointCloud, colors: Option<&ndarray::Array2<f64>>) -> CloudJson {
    CloudJson {
        which: which.name().to_string(),
        num_points: cloud.len(),
        positions: rows(cloud.points()),
        colors: colors.map(rows),
        correspondence: colors.map(|_| (0..cloud.len()).collect()),
    }
}

#[derive(Deserialize)]
struct CloudQuery {
    which: Option<String>,
    format: Option<String>,
}

async fn cloud(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<CloudQuery>,
) -> ApiResult<Response> {
    let which = Which::parse(q.which.as_deref().unwrap_or("recon"))?;
    let format = q.format.as_deref().unwrap_or("json");
    if !matches!(format, "json" | "ply" | "native") {
        return Err(ApiError::BadRequest(format!("unknown format `{format}`; use json, ply or native")));
    }
    let handle = state.get(&id)?;
    let (cloud, colors, transform) = {
        let s = handle.lock().expect("session poisoned");
        let (cloud, colors) = select(&s, which)?;
        (cloud, colors, s.transform)
    };
    Ok(match format {
        "json" => Json(cloud_json(which, &cloud, colors.as_ref())).into_response(),
        "ply" => {
            ([(header::CONTENT_TYPE, "application/x-ply")], write_ply(&cloud, colors.as_ref(), PlyEncoding::Ascii))
                .into_response()
        }
        _ => {
            let native = NativeCloud { cloud, latent_dim: state.snapshot.latent_dim, transform };
            ([(header::CONTENT_TYPE, "application/octet-stream")], encode_native_cloud(&native)).into_response()
        }
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EditResponse {
    /// Depth of the edit stack after the request.
    pub edits: usize,
    pub cloud: CloudJson,
}

fn edited_response(s: &Session) -> ApiResult<Json<EditResponse>> {
    let (cloud, colors) = select(s, Which::Edited)?;
    Ok(Json(EditResponse { edits: s.edits.len(), cloud: cloud_json(Which::Edited, &cloud, colors.as_ref()) }))
}

async fn push_edit(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<EditResponse>> {
    let handle = state.get(&id)?;
    let op: EditOperation =
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("invalid edit operation: {e}")))?;
    let mut s = handle.lock().expect("session poisoned");
    if s.status.in_flight() {
        return Err(ApiError::Conflict("an inversion is running; edits resume once it finishes".into()));
    }
    s.push_edit(op)?;
    edited_response(&s)
}

async fn pop_edit(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<EditResponse>> {
    let handle = state.get(&id)?;
    let mut s = handle.lock().expect("session poisoned");
    if s.status.in_flight() {
        return Err(ApiError::Conflict("an inversion is running; edits resume once it finishes".into()));
    }
    s.pop_edit()?;
    edited_response(&s)
}
