use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use super::{ConfigError, RunRecord, RunStatus, RunStore, ServiceConfig, StoreError};
use crate::camera::{rasterize_frame, Camera, Frame};
use crate::dataset::DEFAULT_QUERY;
use crate::gateway::{ErrorRates, GatewayError, QueryRequest, QueryResponse, Responder, VlmClient};
use crate::geometry::Vec2;
use crate::grounding::AliasDb;
use crate::perception::{oracle_detect, overlay_highlight, static_regions, Corruption, RemoteDetector};
use crate::pipeline::{self, DirSink, HighlightOptions};
use crate::scene::{load_scenario_dir, run_scenario, ScenarioConfig, ScenarioError, ScenarioRun};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot load scenarios: {0}")]
    Scenarios(#[from] ScenarioError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Shared service state. Each camera sits behind its own lock so alias
/// updates on one camera never block queries on another.
pub struct AppState {
    pub config: ServiceConfig,
    cameras: BTreeMap<String, RwLock<Arc<Camera>>>,
    scenarios: BTreeMap<String, ScenarioConfig>,
    store: Arc<RunStore>,
    vlm: Option<VlmClient>,
    detector: Option<RemoteDetector>,
    runs: Mutex<HashMap<String, Arc<ScenarioRun>>>,
}

impl AppState {
    /// Loads cameras, scenarios and the run store named by `config`.
    pub fn load(config: ServiceConfig) -> Result<Self, ServeError> {
        let cameras = config.load_cameras()?;
        let scenarios = load_scenario_dir(&config.scenario_dir)?;
        let store = RunStore::open(&config.store_root)?;
        Ok(Self::from_parts(config, cameras, scenarios, store))
    }

    pub fn from_parts(
        config: ServiceConfig,
        cameras: Vec<Camera>,
        scenarios: Vec<ScenarioConfig>,
        store: RunStore,
    ) -> Self {
        let timeout = Duration::from_millis(config.limits.request_timeout_ms);
        let vlm = config.endpoints.vlm.as_ref().map(|url| {
            VlmClient::new(url.clone(), timeout, config.limits.retries, config.limits.max_in_flight)
                .with_backoff_base(Duration::from_millis(config.limits.backoff_base_ms))
        });
        let detector = config
            .endpoints
            .detector
            .as_ref()
            .map(|url| RemoteDetector::new(url.clone(), timeout, config.limits.max_in_flight));
        AppState {
            cameras: cameras
                .into_iter()
                .map(|c| (c.id().to_owned(), RwLock::new(Arc::new(c))))
                .collect(),
            scenarios: scenarios.into_iter().map(|s| (s.id.clone(), s)).collect(),
            store: Arc::new(store),
            vlm,
            detector,
            runs: Mutex::new(HashMap::new()),
            config,
        }
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    fn camera(&self, id: &str) -> Result<Arc<Camera>, ApiError> {
        self.cameras
            .get(id)
            .map(|c| c.read().expect("camera lock poisoned").clone())
            .ok_or_else(|| ApiError::not_found(format!("no camera `{id}`")))
    }

    fn all_cameras(&self) -> Vec<Camera> {
        self.cameras
            .values()
            .map(|c| (**c.read().expect("camera lock poisoned")).clone())
            .collect()
    }

    fn scenario(&self, id: Option<&str>) -> Result<&ScenarioConfig, ApiError> {
        match id {
            Some(id) => self
                .scenarios
                .get(id)
                .ok_or_else(|| ApiError::not_found(format!("no scenario `{id}`"))),
            None => self
                .scenarios
                .values()
                .next()
                .ok_or_else(|| ApiError::not_found("no scenarios configured")),
        }
    }

    fn run_of(&self, config: &ScenarioConfig) -> Arc<ScenarioRun> {
        let mut runs = self.runs.lock().expect("run cache poisoned");
        runs.entry(config.id.clone())
            .or_insert_with(|| Arc::new(run_scenario(config)))
            .clone()
    }

    /// Ground-truth frame of `camera` at `tick` of a scenario.
    fn truth_frame(&self, camera: &Camera, scenario: &ScenarioConfig, tick: u64) -> Result<Frame, ApiError> {
        let run = self.run_of(scenario);
        let state = run.state_at(tick).ok_or_else(|| {
            ApiError::bad_request(format!(
                "tick {tick} is beyond scenario `{}` ({} ticks)",
                scenario.id, scenario.duration_ticks
            ))
        })?;
        Ok(rasterize_frame(camera, state))
    }

    async fn highlight(&self, camera: &Camera, scenario: &ScenarioConfig, truth: &Frame) -> Result<Frame, ApiError> {
        let detections = match &self.detector {
            Some(d) => d
                .detect(truth)
                .await
                .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()))?,
            None => oracle_detect(truth, Corruption::default(), scenario.seed),
        };
        Ok(overlay_highlight(
            truth,
            &detections,
            &static_regions(camera, &scenario.statics),
        ))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    details: Option<serde_json::Value>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            details: None,
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => ApiError::not_found(e.to_string()),
            StoreError::Immutable(_) => ApiError::new(StatusCode::CONFLICT, e.to_string()),
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        let status = match e {
            GatewayError::EmptyPrompt => StatusCode::BAD_REQUEST,
            GatewayError::Timeout { .. } => StatusCode::GATEWAY_TIMEOUT,
            _ => StatusCode::BAD_GATEWAY,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(e.status(), e.body_text())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: &'a Option<serde_json::Value>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: &self.message,
            details: &self.details,
        };
        (self.status, Json(body)).into_response()
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/cameras", get(list_cameras))
        .route("/cameras/{id}/frame", get(get_frame))
        .route("/cameras/{id}/aliases", get(get_aliases).put(put_aliases))
        .route("/scenarios/{id}/run", post(start_run))
        .route("/runs/{id}", get(get_run))
        .route("/query", post(query))
        .route("/eval", post(start_eval))
        .route("/reports/{id}", get(get_report))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServeError> {
    let state = Arc::new(AppState::load(config)?);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    info!(addr = %listener.local_addr()?, cameras = state.cameras.len(), "serving");
    axum::serve(listener, router(state)).await?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CameraSummary {
    pub id: String,
    pub origin: Vec2,
    pub scale: f64,
    pub resolution: [u32; 2],
    pub capture_period_ticks: u64,
    pub aliases: Vec<String>,
}

async fn list_cameras(State(state): State<Shared>) -> Json<Vec<CameraSummary>> {
    let cameras = state.all_cameras();
    Json(
        cameras
            .into_iter()
            .map(|c| CameraSummary {
                aliases: c.sections.aliases().map(str::to_owned).collect(),
                id: c.config.id,
                origin: c.config.origin,
                scale: c.config.scale,
                resolution: c.config.resolution,
                capture_period_ticks: c.config.capture_period_ticks,
            })
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
struct FrameParams {
    tick: u64,
    #[serde(default)]
    overlay: bool,
    scenario: Option<String>,
}

async fn get_frame(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(params): Query<FrameParams>,
) -> Result<Response, ApiError> {
    let camera = state.camera(&id)?;
    let scenario = state.scenario(params.scenario.as_deref())?;
    let truth = state.truth_frame(&camera, scenario, params.tick)?;
    let frame = if params.overlay {
        state.highlight(&camera, scenario, &truth).await?
    } else {
        truth
    };
    Ok((
        [(header::CONTENT_TYPE, "image/x-portable-pixmap")],
        frame.image.to_ppm(),
    )
        .into_response())
}

async fn get_aliases(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<AliasDb>, ApiError> {
    let camera = state.camera(&id)?;
    Ok(Json(AliasDb::from_parts(&camera.sections, &camera.aliases)))
}

/// Full-table replacement. The body must be a complete alias database; it is
/// validated before anything changes and persisted with a rename.
async fn put_aliases(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<AliasDb>, JsonRejection>,
) -> Result<Json<AliasDb>, ApiError> {
    let Json(db) = body?;
    let slot = state
        .cameras
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no camera `{id}`")))?;
    if db.camera_id != id {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("table is for camera `{}`, not `{id}`", db.camera_id),
        ));
    }
    let violations = db.violations();
    if !violations.is_empty() {
        let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "alias table rejected");
        err.details = Some(serde_json::to_value(&violations).expect("violations serialize"));
        return Err(err);
    }
    let current = slot.read().expect("camera lock poisoned").clone();
    let path = current.config.alias_db.clone();
    persist(&path, &db).map_err(|e| ApiError::internal(format!("cannot persist {}: {e}", path.display())))?;
    let (sections, aliases) = db.split();
    let updated =
        Camera::new(current.config.clone(), sections, aliases).map_err(|e| ApiError::internal(e.to_string()))?;
    *slot.write().expect("camera lock poisoned") = Arc::new(updated);
    info!(camera = %id, "alias table replaced");
    Ok(Json(db))
}

fn persist(path: &std::path::Path, db: &AliasDb) -> std::io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut text = serde_json::to_vec_pretty(db).expect("alias db serializes");
    text.push(b'\n');
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)
}

async fn start_run(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<(StatusCode, Json<RunRecord>), ApiError> {
    let scenario = state.scenario(Some(&id))?.clone();
    let (record, staging) = state.store.create("sim", Some(&scenario.id))?;
    let cameras = state.all_cameras();
    let store = state.store.clone();
    let run_id = record.id.clone();
    tokio::task::spawn_blocking(move || {
        let outcome = store
            .mark_running(&run_id)
            .map_err(|e| e.to_string())
            .and_then(|_| pipeline::simulate(&[scenario], &cameras, &DirSink::new(staging)).map_err(|e| e.to_string()));
        let done = match outcome {
            Ok(frames) => {
                info!(run = %run_id, frames, "run finished");
                store.finish(&run_id)
            }
            Err(e) => {
                warn!(run = %run_id, error = %e, "run failed");
                store.fail(&run_id, &e)
            }
        };
        if let Err(e) = done {
            warn!(run = %run_id, error = %e, "cannot record run outcome");
        }
    });
    Ok((StatusCode::ACCEPTED, Json(record)))
}

async fn get_run(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<RunRecord>, ApiError> {
    Ok(Json(state.store.get(&id)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponderChoice {
    #[default]
    Oracle,
    Remote,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueryBody {
    pub camera_id: String,
    pub tick: u64,
    #[serde(default = "default_prompt")]
    pub prompt: String,
    #[serde(default)]
    pub responder: ResponderChoice,
    #[serde(default)]
    pub error_rates: Option<ErrorRates>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scenario: Option<String>,
}

fn default_prompt() -> String {
    DEFAULT_QUERY.to_owned()
}

impl AppState {
    fn responder(&self, choice: ResponderChoice, rates: Option<ErrorRates>, seed: u64) -> Result<Responder, ApiError> {
        match choice {
            ResponderChoice::Oracle => Ok(Responder::Oracle {
                rates: rates.unwrap_or_default(),
                seed,
            }),
            ResponderChoice::Remote => self
                .vlm
                .clone()
                .map(Responder::Remote)
                .ok_or_else(|| ApiError::bad_request("no model endpoint configured")),
        }
    }
}

async fn query(
    State(state): State<Shared>,
    body: Result<Json<QueryBody>, JsonRejection>,
) -> Result<Json<QueryResponse>, ApiError> {
    let Json(body) = body?;
    if body.prompt.trim().is_empty() {
        return Err(ApiError::bad_request("prompt must not be empty"));
    }
    let responder = state.responder(body.responder, body.error_rates, body.seed)?;
    let camera = state.camera(&body.camera_id)?;
    let scenario = state.scenario(body.scenario.as_deref())?;
    let truth = state.truth_frame(&camera, scenario, body.tick)?;
    let highlighted = state.highlight(&camera, scenario, &truth).await?;
    let request = QueryRequest {
        request_id: 0,
        camera_id: body.camera_id,
        tick: body.tick,
        prompt: body.prompt,
        image: Arc::new(highlighted),
    };
    Ok(Json(
        responder
            .for_scenario(&scenario.id)
            .respond(&request, &truth, &camera)
            .await?,
    ))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalBody {
    pub run_id: String,
    #[serde(default)]
    pub responder: ResponderChoice,
    #[serde(default)]
    pub error_rates: Option<ErrorRates>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_prompt")]
    pub prompt: String,
}

async fn start_eval(
    State(state): State<Shared>,
    body: Result<Json<EvalBody>, JsonRejection>,
) -> Result<(StatusCode, Json<RunRecord>), ApiError> {
    let Json(body) = body?;
    let source = state.store.get(&body.run_id)?;
    if source.status != RunStatus::Done {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("run `{}` is not done", source.id),
        ));
    }
    let scenario_id = source
        .scenario_id
        .clone()
        .ok_or_else(|| ApiError::bad_request(format!("run `{}` has no scenario", source.id)))?;
    let scenario = state.scenario(Some(&scenario_id))?.clone();
    let responder = state.responder(body.responder, body.error_rates, body.seed)?;
    let (record, staging) = state.store.create("eval", Some(&scenario_id))?;
    let frames_root: PathBuf = state.store.run_dir(&source.id);
    let cameras = state.all_cameras();
    let store = state.store.clone();
    let report_id = record.id.clone();
    tokio::spawn(async move {
        let outcome = async {
            store.mark_running(&report_id).map_err(|e| e.to_string())?;
            let load_cameras = cameras.clone();
            let frames = tokio::task::spawn_blocking(move || {
                pipeline::load_simulated(&frames_root, &scenario, &load_cameras, HighlightOptions::default())
            })
            .await
            .map_err(|e| e.to_string())?
            .map_err(|e| e.to_string())?;
            let scores = pipeline::score_captured(frames, &cameras, &responder, &body.prompt)
                .await
                .map_err(|e| e.to_string())?;
            let report = crate::eval::aggregate(scores).map_err(|e| e.to_string())?;
            let mut text = serde_json::to_vec_pretty(&report).expect("reports serialize");
            text.push(b'\n');
            std::fs::write(staging.join(REPORT_FILE), text).map_err(|e| e.to_string())
        }
        .await;
        let done = match outcome {
            Ok(()) => store.finish(&report_id),
            Err(e) => {
                warn!(report = %report_id, error = %e, "evaluation failed");
                store.fail(&report_id, &e)
            }
        };
        if let Err(e) = done {
            warn!(report = %report_id, error = %e, "cannot record evaluation outcome");
        }
    });
    Ok((StatusCode::ACCEPTED, Json(record)))
}

async fn get_report(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let record = state.store.get(&id)?;
    match record.status {
        RunStatus::Done => {
            let bytes = state.store.read_artifact(&id, REPORT_FILE)?;
            Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
        }
        RunStatus::Failed => {
            let mut err = ApiError::internal(format!("evaluation `{id}` failed"));
            err.details = Some(serde_json::to_value(&record).expect("records serialize"));
            Err(err)
        }
        RunStatus::Pending | RunStatus::Running => Ok((StatusCode::ACCEPTED, Json(record)).into_response()),
    }
}
