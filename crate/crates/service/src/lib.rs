//! HTTP/JSON front end for the certification pipeline.
//!
//! | method | path | body / result |
//! |---|---|---|
//! | POST | `/data-config` | data configuration, returned normalized |
//! | POST | `/parse-data` | configuration plus files, returns parsed data |
//! | GET, POST | `/certificate` | stored certificate requests |
//! | POST | `/min-tradeoff` | certificate request, returns a job id |
//! | GET | `/jobs/{id}` | job status and result |
//! | POST | `/rates` | min-tradeoff and parameter lists, runs the sweep |
//! | GET | `/rates/{id}/grid` | `?x=&y=&format=csv|json` |
//!
//! Errors are `{"code": ..., "message": ...}` with an HTTP status to match.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use diqcert::eat::{sweep, Axis, EatSweepResult, SweepCell, SweepLists};
use diqcert::edq::{EdqDocument, Stage};
use diqcert::ingest::{parse_data_config, parse_data_dir, parse_data_text, AggregatedCounts, DataConfig, EberData};
use diqcert::npa::NpaError;
use diqcert::solver::{default_solver, SdpSolver, SolveStatus};
use diqcert::tradeoff::{calculate_mintradeoff, MinTradeoffInfo, MinTradeoffRequest, TradeoffError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_status: Option<SolveStatus>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
            solver_status: None,
        }
    }

    fn invalid(code: &str, message: impl ToString) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message.to_string())
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no {what} with id '{id}'"))
    }
}

impl From<TradeoffError> for ApiError {
    fn from(e: TradeoffError) -> Self {
        match e {
            TradeoffError::Relaxation(NpaError::Unsolved { status, ref what }) => Self {
                solver_status: Some(status),
                ..Self::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "solver_failed",
                    format!("solver returned {status:?} for {what}"),
                )
            },
            TradeoffError::Relaxation(NpaError::Solver(s)) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "solver_error", s.to_string())
            }
            TradeoffError::MissingHab { .. } => Self::invalid("missing_hab", e),
            other => Self::invalid("invalid_certificate", other),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub status: JobStatus,
    pub request: MinTradeoffRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<MinTradeoffInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
}

#[derive(Default)]
struct Tables {
    next_id: u64,
    jobs: HashMap<String, Job>,
    by_hash: HashMap<u64, String>,
    certificates: Vec<(String, MinTradeoffRequest)>,
    sweeps: HashMap<String, EatSweepResult>,
}

impl Tables {
    fn fresh_id(&mut self, prefix: &str) -> String {
        self.next_id += 1;
        format!("{prefix}-{}", self.next_id)
    }
}

pub struct AppState {
    solver: Arc<dyn SdpSolver>,
    pool: Arc<Semaphore>,
    state_dir: Option<PathBuf>,
    tables: Mutex<Tables>,
}

impl AppState {
    pub fn new(solver: Arc<dyn SdpSolver>, workers: usize, state_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(Self {
            solver,
            pool: Arc::new(Semaphore::new(workers.max(1))),
            state_dir,
            tables: Mutex::new(Tables::default()),
        })
    }

    /// Default solver, one worker per CPU.
    pub fn with_defaults(state_dir: Option<PathBuf>) -> Arc<Self> {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
        Self::new(Arc::from(default_solver()), workers, state_dir)
    }

    fn tables(&self) -> MutexGuard<'_, Tables> {
        self.tables.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn persist(&self, name: &str, stage: Stage, nickname: &str) {
        let Some(dir) = &self.state_dir else { return };
        let path = dir.join(format!("{name}.edq"));
        if let Err(e) = EdqDocument::new(stage, nickname).save(&path) {
            log::warn!("could not save {}: {e}", path.display());
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/data-config", post(post_data_config))
        .route("/parse-data", post(post_parse_data))
        .route("/certificate", get(list_certificates).post(post_certificate))
        .route("/min-tradeoff", post(post_min_tradeoff))
        .route("/jobs/{id}", get(get_job))
        .route("/rates", post(post_rates))
        .route("/rates/{id}/grid", get(get_grid))
        .with_state(state)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(addr: &str, state_dir: Option<&Path>) -> std::io::Result<()> {
    if let Some(dir) = state_dir {
        std::fs::create_dir_all(dir)?;
    }
    let state = AppState::with_defaults(state_dir.map(Path::to_path_buf));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn post_data_config(Json(body): Json<serde_json::Value>) -> Result<Json<DataConfig>, ApiError> {
    parse_data_config(&body.to_string())
        .map(Json)
        .map_err(|e| ApiError::invalid("invalid_config", e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataFile {
    pub name: String,
    pub content: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseDataRequest {
    pub config: serde_json::Value,
    /// Inline file contents; when empty the configured directory is read.
    #[serde(default)]
    pub files: Vec<DataFile>,
    #[serde(default)]
    pub directory: Option<String>,
    /// Expressions to evaluate with error bars.
    #[serde(default)]
    pub expressions: Vec<String>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_confidence() -> f64 {
    0.99
}

fn parse_data(req: ParseDataRequest) -> Result<EberData, ApiError> {
    let config = parse_data_config(&req.config.to_string()).map_err(|e| ApiError::invalid("invalid_config", e))?;
    let data_err = |e: diqcert::ingest::IngestError| ApiError::invalid("invalid_data", e);
    let counts = if req.files.is_empty() {
        let dir = req.directory.clone().unwrap_or_else(|| config.directory_with_datafiles.clone());
        parse_data_dir(&config, Path::new(&dir)).map_err(data_err)?
    } else {
        let mut files = req.files.clone();
        files.sort_by(|a, b| a.name.cmp(&b.name));
        let mut total = AggregatedCounts::empty(&config).map_err(data_err)?;
        for f in &files {
            total.merge(&parse_data_text(&config, &f.name, &f.content).map_err(data_err)?).map_err(data_err)?;
        }
        if total.accepted_rows() == 0 {
            return Err(data_err(diqcert::ingest::IngestError::NoRows {
                ignored: total.report.ignored_metadata,
                unknown_tag: total.report.unknown_tag,
                short: total.report.short_rows,
            }));
        }
        total
    };
    let mut eber = EberData::new(config, counts).map_err(data_err)?;
    for e in &req.expressions {
        eber.add_expression(e, req.confidence)
            .map_err(|e| ApiError::invalid("invalid_expression", e))?;
    }
    Ok(eber)
}

async fn post_parse_data(Json(req): Json<ParseDataRequest>) -> Result<Json<EberData>, ApiError> {
    tokio::task::spawn_blocking(move || parse_data(req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map(Json)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredCertificate {
    pub id: String,
    pub certificate: MinTradeoffRequest,
}

async fn list_certificates(State(state): State<Arc<AppState>>) -> Json<Vec<StoredCertificate>> {
    let t = state.tables();
    Json(
        t.certificates
            .iter()
            .map(|(id, c)| StoredCertificate {
                id: id.clone(),
                certificate: c.clone(),
            })
            .collect(),
    )
}

async fn post_certificate(
    State(state): State<Arc<AppState>>,
    Json(req): Json<MinTradeoffRequest>,
) -> Result<(StatusCode, Json<StoredCertificate>), ApiError> {
    req.validate()?;
    let id = {
        let mut t = state.tables();
        let id = t.fresh_id("cert");
        t.certificates.push((id.clone(), req.clone()));
        id
    };
    state.persist(&id, Stage::Certificate(req.clone()), &req.setup_nickname);
    Ok((StatusCode::CREATED, Json(StoredCertificate { id, certificate: req })))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobHandle {
    pub job_id: String,
    pub status: JobStatus,
}

fn request_hash(req: &MinTradeoffRequest) -> u64 {
    let mut h = DefaultHasher::new();
    serde_json::to_string(req).expect("request serializes").hash(&mut h);
    h.finish()
}

async fn post_min_tradeoff(
    State(state): State<Arc<AppState>>,
    Json(req): Json<MinTradeoffRequest>,
) -> Result<(StatusCode, Json<JobHandle>), ApiError> {
    req.validate()?;
    let key = request_hash(&req);
    let id = {
        let mut t = state.tables();
        if let Some(id) = t.by_hash.get(&key).cloned() {
            let status = t.jobs[&id].status;
            if status != JobStatus::Failed {
                return Ok((StatusCode::OK, Json(JobHandle { job_id: id, status })));
            }
        }
        let id = t.fresh_id("job");
        t.jobs.insert(
            id.clone(),
            Job {
                id: id.clone(),
                status: JobStatus::Queued,
                request: req.clone(),
                result: None,
                error: None,
            },
        );
        t.by_hash.insert(key, id.clone());
        id
    };
    tokio::spawn(run_job(state.clone(), id.clone(), req));
    Ok((
        StatusCode::ACCEPTED,
        Json(JobHandle {
            job_id: id,
            status: JobStatus::Queued,
        }),
    ))
}

async fn run_job(state: Arc<AppState>, id: String, req: MinTradeoffRequest) {
    let Ok(_permit) = state.pool.clone().acquire_owned().await else {
        return;
    };
    if let Some(job) = state.tables().jobs.get_mut(&id) {
        job.status = JobStatus::Running;
    }
    let solver = state.solver.clone();
    let outcome = tokio::task::spawn_blocking(move || calculate_mintradeoff(&req, solver.as_ref())).await;
    let outcome = match outcome {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())),
    };
    if let Ok(info) = &outcome {
        state.persist(&id, Stage::MinTradeoff(Box::new(info.clone())), &info.setup_nickname);
    }
    let mut t = state.tables();
    if let Some(job) = t.jobs.get_mut(&id) {
        match outcome {
            Ok(info) => {
                job.status = JobStatus::Done;
                job.result = Some(info);
            }
            Err(e) => {
                log::warn!("job {id} failed: {}", e.message);
                job.status = JobStatus::Failed;
                job.error = Some(e);
            }
        }
    }
}

async fn get_job(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<Job>, ApiError> {
    state
        .tables()
        .jobs
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("job", &id))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatesRequest {
    /// A finished min-tradeoff job, or the min-tradeoff itself.
    #[serde(default)]
    pub job_id: Option<String>,
    #[serde(default)]
    pub min_tradeoff: Option<MinTradeoffInfo>,
    pub lists: SweepLists,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatesResponse {
    pub id: String,
    pub net_gain_per_second: f64,
    pub asymptotic_keyrate: f64,
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub best: SweepCell,
    pub cells: usize,
}

async fn post_rates(
    State(state): State<Arc<AppState>>,
    Json(req): Json<RatesRequest>,
) -> Result<Json<RatesResponse>, ApiError> {
    let info = match (req.min_tradeoff, req.job_id) {
        (Some(info), _) => info,
        (None, Some(job_id)) => {
            let t = state.tables();
            let job = t.jobs.get(&job_id).ok_or_else(|| ApiError::not_found("job", &job_id))?;
            job.result.clone().ok_or_else(|| {
                ApiError::new(
                    StatusCode::CONFLICT,
                    "job_not_done",
                    format!("job '{job_id}' is {:?}", job.status),
                )
            })?
        }
        (None, None) => return Err(ApiError::invalid("invalid_rates", "give job_id or min_tradeoff")),
    };
    let lists = req.lists;
    let result = tokio::task::spawn_blocking(move || sweep(&info, &lists))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::invalid("invalid_rates", e))?;
    let id = state.tables().fresh_id("rates");
    let response = RatesResponse {
        id: id.clone(),
        net_gain_per_second: result.net_gain_per_second(),
        asymptotic_keyrate: result.asymptotic_keyrate,
        parameters: result.parameters_dict(),
        best: result.best_cell().clone(),
        cells: result.cells.len(),
    };
    state.persist(&id, Stage::SweepResult(Box::new(result.clone())), "");
    state.tables().sweeps.insert(id, result);
    Ok(Json(response))
}

#[derive(Debug, Clone, Deserialize)]
pub struct GridQuery {
    #[serde(default = "default_x")]
    pub x: String,
    #[serde(default = "default_y")]
    pub y: String,
    #[serde(default)]
    pub format: Option<String>,
}

fn default_x() -> String {
    "neg_log_beta".into()
}

fn default_y() -> String {
    "gamma".into()
}

async fn get_grid(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<GridQuery>,
) -> Result<Response, ApiError> {
    let x: Axis = q.x.parse().map_err(|e: String| ApiError::invalid("invalid_axis", e))?;
    let y: Axis = q.y.parse().map_err(|e: String| ApiError::invalid("invalid_axis", e))?;
    let grid = {
        let t = state.tables();
        let result = t.sweeps.get(&id).ok_or_else(|| ApiError::not_found("sweep", &id))?;
        result.grid(x, y)
    };
    match q.format.as_deref() {
        Some("csv") => {
            let csv = grid
                .to_csv()
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
            Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response())
        }
        None | Some("json") => Ok(Json(grid).into_response()),
        Some(other) => Err(ApiError::invalid("invalid_format", format!("unknown format '{other}'"))),
    }
}
