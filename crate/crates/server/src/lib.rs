//! HTTP front end over `learnwave-core`.
//!
//! Sweeps and training runs are jobs: `POST /v1/jobs` returns an id at once
//! and the work runs on the blocking pool, at most `max_jobs` at a time.
//! Clients poll `GET /v1/jobs/{id}`. Output files land in the job's
//! configured `output_dir` on the server's filesystem.

mod jobs;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use learnwave_api::{
    ErrorBody, Health, JobCreated, JobRequest, JobState, JobStatus, MetricsRequest, MetricsResponse, ResolveRequest,
    ToneReservationRequest, ToneReservationResponse,
};
use learnwave_core::baseline::{tr_minimize_peak, PrtAllocation};
use learnwave_core::experiment::ExperimentConfig;
use learnwave_core::units::linear_to_db;
use learnwave_core::waveform::{aclr, compute_gram, papr_epsilon, GramPair, OversampledIdft, QuadratureConfig, SubcarrierGrid};
use learnwave_core::Error;
use tokio::sync::Semaphore;

/// Core error with the HTTP status it maps to.
pub struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io(_) | Error::Diverged { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    jobs: Mutex<BTreeMap<u64, JobStatus>>,
    next_id: AtomicU64,
    permits: Arc<Semaphore>,
    grams: Mutex<HashMap<(SubcarrierGrid, usize), Arc<GramPair>>>,
}

impl AppState {
    pub fn new(max_jobs: usize) -> Self {
        AppState {
            inner: Arc::new(Inner {
                jobs: Mutex::new(BTreeMap::new()),
                next_id: AtomicU64::new(1),
                permits: Arc::new(Semaphore::new(max_jobs.max(1))),
                grams: Mutex::new(HashMap::new()),
            }),
        }
    }

    /// Energy Gram matrices are cached per grid and quadrature density.
    fn gram(&self, grid: &SubcarrierGrid, q: &QuadratureConfig) -> Result<Arc<GramPair>, Error> {
        let key = (*grid, q.nodes_per_unit);
        if let Some(g) = self.inner.grams.lock().unwrap().get(&key) {
            return Ok(g.clone());
        }
        let g = Arc::new(compute_gram(grid, q)?);
        self.inner.grams.lock().unwrap().insert(key, g.clone());
        Ok(g)
    }

    fn update_job(&self, id: u64, f: impl FnOnce(&mut JobStatus)) {
        if let Some(job) = self.inner.jobs.lock().unwrap().get_mut(&id) {
            f(job);
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/config/resolve", post(resolve))
        .route("/v1/jobs", post(submit))
        .route("/v1/jobs/{id}", get(job))
        .route("/v1/waveform/metrics", post(metrics))
        .route("/v1/tone-reservation", post(tone_reservation))
        .with_state(state)
}

/// Bind and serve in the background; returns the bound address.
pub async fn start(addr: SocketAddr, max_jobs: usize) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(AppState::new(max_jobs));
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!("server stopped: {e}");
        }
    });
    Ok((local, handle))
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into() })
}

pub fn resolve_config(req: &ResolveRequest) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &req.toml {
        Some(text) => ExperimentConfig::from_toml(text, req.profile.as_deref())?,
        None => ExperimentConfig::profile(req.profile.as_deref().unwrap_or("desk"))?,
    };
    if let Some(seed) = req.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &req.output_dir {
        cfg.output_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

async fn resolve(Json(req): Json<ResolveRequest>) -> ApiResult<ExperimentConfig> {
    Ok(Json(resolve_config(&req)?))
}

async fn submit(State(state): State<AppState>, Json(req): Json<JobRequest>) -> Result<(StatusCode, Json<JobCreated>), ApiError> {
    jobs::check(&req)?;
    let id = state.inner.next_id.fetch_add(1, Ordering::Relaxed);
    let status = JobStatus {
        id,
        kind: req.kind,
        state: JobState::Queued,
        progress: Vec::new(),
        records: Vec::new(),
        files: Vec::new(),
        error: None,
    };
    state.inner.jobs.lock().unwrap().insert(id, status);
    tracing::info!(id, kind = ?req.kind, "job queued");
    let permits = state.inner.permits.clone();
    tokio::spawn(async move {
        let Ok(_permit) = permits.acquire_owned().await else { return };
        state.update_job(id, |j| j.state = JobState::Running);
        let worker = state.clone();
        let outcome = tokio::task::spawn_blocking(move || jobs::run(&worker, id, &req)).await;
        let result = match outcome {
            Ok(r) => r.map_err(|e| e.to_string()),
            Err(e) => Err(format!("job panicked: {e}")),
        };
        state.update_job(id, |j| match result {
            Ok(out) => {
                j.state = JobState::Succeeded;
                j.records = out.records;
                j.files = out.files;
            }
            Err(e) => {
                j.state = JobState::Failed;
                j.error = Some(e);
            }
        });
        tracing::info!(id, "job finished");
    });
    Ok((StatusCode::ACCEPTED, Json(JobCreated { id })))
}

async fn job(State(state): State<AppState>, Path(id): Path<u64>) -> Result<Json<JobStatus>, ApiError> {
    state
        .inner
        .jobs
        .lock()
        .unwrap()
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no job {id}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

async fn metrics(State(state): State<AppState>, Json(req): Json<MetricsRequest>) -> ApiResult<MetricsResponse> {
    let out = blocking(move || {
        let q = req.quadrature.unwrap_or_default();
        let gram = state.gram(&req.grid, &q)?;
        let plan = OversampledIdft::new(req.grid);
        let signals = req.symbols.iter().map(|x| plan.to_time(x)).collect::<Result<Vec<_>, _>>()?;
        let papr = papr_epsilon(&signals, req.epsilon)?;
        let aclr_db = linear_to_db(aclr(&req.symbols, &gram)?);
        Ok(MetricsResponse { papr, aclr_db })
    })
    .await?;
    Ok(Json(out))
}

async fn tone_reservation(Json(req): Json<ToneReservationRequest>) -> ApiResult<ToneReservationResponse> {
    let out = blocking(move || {
        req.symbol.check(&req.grid)?;
        let alloc = PrtAllocation::from_reserved(&req.grid, &req.reserved)?;
        if let Some(&p) = alloc.reserved().iter().find(|&&p| req.symbol.0[p].norm_sqr() != 0.0) {
            return Err(Error::InvalidArgument(format!("symbol is non-zero on reserved position {p}")));
        }
        let plan = OversampledIdft::new(req.grid);
        let sol = tr_minimize_peak(&req.symbol, &alloc, &plan, &req.solver.unwrap_or_default())?;
        Ok(ToneReservationResponse { c: sol.c, peak: sol.peak, initial_peak: sol.initial_peak, iterations: sol.iterations })
    })
    .await?;
    Ok(Json(out))
}
