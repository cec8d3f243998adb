//! Sessions and the shared, read-only model snapshot.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;
use sphinv_core::{NormalizeTransform, PointCloud};
use sphinv_model::editing::{regenerate, replay, EditOperation};
use sphinv_model::inversion::{AblationMode, InversionConfig, InversionResult, Models};
use tokio::sync::Semaphore;

use crate::error::{ApiError, ApiResult};

/// Loaded models plus the inversion defaults every session starts from.
pub struct ModelSnapshot {
    pub models: Models,
    pub num_points: usize,
    pub latent_dim: usize,
    pub defaults: InversionConfig,
}

impl ModelSnapshot {
    pub fn new(models: Models, defaults: InversionConfig) -> ApiResult<Self> {
        let any = models
            .pretrained
            .clone()
            .or_else(|| models.global.as_ref().map(|p| p.generator.clone()))
            .or_else(|| models.local.as_ref().map(|p| p.generator.clone()))
            .ok_or_else(|| ApiError::Internal("the checkpoint holds no generator".into()))?;
        let cfg = any.config();
        Ok(Self { num_points: cfg.num_points, latent_dim: cfg.latent_dim, models, defaults })
    }

    pub fn serves(&self, mode: AblationMode) -> bool {
        match mode {
            AblationMode::Full | AblationMode::LearnGlobal => self.models.global.is_some(),
            AblationMode::LearnLocal => self.models.local.is_some(),
            AblationMode::OptGlobal | AblationMode::OptLocal => self.models.pretrained.is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobStatus {
    /// No inversion requested yet.
    Idle,
    /// Accepted, waiting for a worker.
    Pending {
        mode: AblationMode,
    },
    Running {
        mode: AblationMode,
        iteration: usize,
        total: usize,
        loss: Option<f64>,
        best: Option<f64>,
    },
    Done {
        mode: AblationMode,
        initial_cd: f64,
        final_cd: f64,
        iterations: usize,
    },
    Failed {
        mode: AblationMode,
        error: String,
    },
}

impl JobStatus {
    pub fn in_flight(&self) -> bool {
        matches!(self, Self::Pending { .. } | Self::Running { .. })
    }
}

pub struct Session {
    /// Normalized target as seen by the models.
    pub target: PointCloud,
    pub transform: NormalizeTransform,
    pub status: JobStatus,
    pub result: Option<Arc<InversionResult>>,
    pub edits: Vec<EditOperation>,
    /// Regenerated cloud for the current edit stack.
    pub edited: Option<PointCloud>,
}

impl Session {
    pub fn new(target: PointCloud, transform: NormalizeTransform) -> Self {
        Self { target, transform, status: JobStatus::Idle, result: None, edits: Vec::new(), edited: None }
    }

    fn require_result(&self) -> ApiResult<Arc<InversionResult>> {
        self.result.clone().ok_or_else(|| ApiError::Conflict("no completed inversion in this session".into()))
    }

    /// Replays the stack from the inversion codes. Deterministic: equal stacks
    /// give bit-identical clouds.
    fn rebuild(&mut self, edits: Vec<EditOperation>) -> ApiResult<()> {
        let result = self.require_result()?;
        let codes = replay(&result.codes, &edits)?;
        let cloud = regenerate(&codes, &result.style, &result.generator)?;
        self.edits = edits;
        self.edited = Some(cloud);
        Ok(())
    }

    pub fn push_edit(&mut self, op: EditOperation) -> ApiResult<()> {
        let result = self.require_result()?;
        let (n, width) = result.codes.values().dim();
        op.validate(n, width)?;
        let mut edits = self.edits.clone();
        edits.push(op);
        self.rebuild(edits)
    }

    pub fn pop_edit(&mut self) -> ApiResult<()> {
        self.require_result()?;
        let mut edits = self.edits.clone();
        if edits.pop().is_none() {
            return Err(ApiError::Conflict("the edit stack is empty".into()));
        }
        self.rebuild(edits)
    }

    pub fn install_result(&mut self, result: InversionResult) {
        self.edited = Some(result.reconstruction.clone());
        self.edits.clear();
        self.result = Some(Arc::new(result));
    }
}

pub type SessionHandle = Arc<Mutex<Session>>;

pub struct AppState {
    pub snapshot: Arc<ModelSnapshot>,
    pub max_sessions: usize,
    /// Bounds concurrently running inversions.
    pub workers: Arc<Semaphore>,
    sessions: RwLock<HashMap<String, SessionHandle>>,
}

impl AppState {
    pub fn new(snapshot: ModelSnapshot, max_sessions: usize, workers: usize) -> Self {
        Self {
            snapshot: Arc::new(snapshot),
            max_sessions,
            workers: Arc::new(Semaphore::new(workers.max(1))),
            sessions: RwLock::new(HashMap::new()),
        }
    }

    pub fn insert(&self, session: Session) -> ApiResult<String> {
        let mut map = self.sessions.write().expect("session map poisoned");
        if map.len() >= self.max_sessions {
            return Err(ApiError::Unavailable(format!("session limit of {} reached", self.max_sessions)));
        }
        let id = loop {
            let id = format!("{:032x}", rand::random::<u128>());
            if !map.contains_key(&id) {
                break id;
            }
        };
        map.insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    pub fn get(&self, id: &str) -> ApiResult<SessionHandle> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("unknown session {id}")))
    }

    pub fn remove(&self, id: &str) -> ApiResult<()> {
        self.sessions
            .write()
            .expect("session map poisoned")
            .remove(id)
            .map(|_| ())
            .ok_or_else(|| ApiError::NotFound(format!("unknown session {id}")))
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
