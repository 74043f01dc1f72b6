//! HTTP+JSON service hosting live runs that a human can watch and steer.
//!
//! Each run owns a worker thread that advances the algorithm one iteration
//! at a time. Parameter overrides posted over HTTP wait in a mailbox until
//! the next iteration boundary, and every applied override is appended to
//! the run's event log, which clients read with a dense integer cursor.

pub mod error;
pub mod run;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{StatusCode, Uri};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tokio::net::TcpListener;

use otf_core::api::{
    self, ControlRequest, ControlResponse, CreateRunRequest, EventsPage, ParamAck, ParamRequest, RunInfo,
    DEFAULT_TICK_MS,
};
use otf_core::harness::RunRecord;

pub use error::{ApiError, ApiResult};
pub use run::LiveRun;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    /// Per-iteration delay for runs that do not set their own.
    pub tick_ms: u64,
    /// Directory of static assets served under `/`.
    pub assets: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            tick_ms: DEFAULT_TICK_MS,
            assets: None,
        }
    }
}

#[derive(Debug, Default)]
struct Registry {
    runs: HashMap<String, Arc<LiveRun>>,
    order: Vec<String>,
}

/// Shared handle to every live run of a server.
#[derive(Debug, Clone)]
pub struct AppState {
    registry: Arc<RwLock<Registry>>,
    tick_ms: u64,
}

impl AppState {
    pub fn new(tick_ms: u64) -> Self {
        Self {
            registry: Arc::default(),
            tick_ms,
        }
    }

    pub fn create(&self, request: CreateRunRequest) -> ApiResult<Arc<LiveRun>> {
        let id = uuid::Uuid::new_v4().to_string();
        let run = LiveRun::spawn(id.clone(), request, self.tick_ms)?;
        let mut reg = self.registry.write().unwrap_or_else(|p| p.into_inner());
        reg.runs.insert(id.clone(), Arc::clone(&run));
        reg.order.push(id);
        Ok(run)
    }

    pub fn get(&self, id: &str) -> ApiResult<Arc<LiveRun>> {
        let reg = self.registry.read().unwrap_or_else(|p| p.into_inner());
        reg.runs
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no run `{id}`")))
    }

    pub fn list(&self) -> Vec<Arc<LiveRun>> {
        let reg = self.registry.read().unwrap_or_else(|p| p.into_inner());
        reg.order.iter().map(|id| Arc::clone(&reg.runs[id])).collect()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::from_json(&e))
}

async fn create_run(State(app): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let request: CreateRunRequest = parse_body(&body)?;
    let run = app.create(request)?;
    tracing::info!(run = %run.run_id, algorithm = %run.algorithm, "run created");
    Ok((StatusCode::CREATED, Json(run.info())))
}

async fn list_runs(State(app): State<AppState>) -> Json<Vec<RunInfo>> {
    Json(app.list().iter().map(|r| r.info()).collect())
}

async fn get_run(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RunInfo>> {
    Ok(Json(app.get(&id)?.info()))
}

async fn control(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<ControlResponse>> {
    let run = app.get(&id)?;
    let req: ControlRequest = parse_body(&body)?;
    let state = run.transition(req.action)?;
    Ok(Json(ControlResponse { state }))
}

async fn params(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<ParamAck>> {
    let run = app.get(&id)?;
    let req: ParamRequest = parse_body(&body)?;
    Ok(Json(run.adjust(&req.parameter, req.value)?))
}

#[derive(Debug, Deserialize)]
struct CursorQuery {
    cursor: Option<String>,
}

async fn events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<CursorQuery>,
) -> ApiResult<Json<EventsPage>> {
    let run = app.get(&id)?;
    let cursor = match q.cursor.as_deref() {
        None => 0,
        Some(s) => s
            .parse::<u64>()
            .map_err(|_| ApiError::bad_request("cursor must be a non-negative integer").with_field("cursor"))?,
    };
    Ok(Json(run.events(cursor)))
}

async fn record(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RunRecord>> {
    Ok(Json(app.get(&id)?.record()))
}

async fn objectives() -> Json<Vec<api::ObjectiveInfo>> {
    Json(api::objectives())
}

async fn not_found(uri: Uri) -> ApiError {
    ApiError::not_found(format!("no route for {}", uri.path()))
}

pub fn router(app: AppState, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/runs", post(create_run).get(list_runs))
        .route("/api/runs/{id}", get(get_run))
        .route("/api/runs/{id}/control", post(control))
        .route("/api/runs/{id}/params", post(params))
        .route("/api/runs/{id}/events", get(events))
        .route("/api/runs/{id}/record", get(record))
        .route("/api/objectives", get(objectives))
        .route("/api/{*rest}", axum::routing::any(not_found))
        .with_state(app);
    match assets {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api.fallback(not_found),
    }
}

/// A bound, not yet running server.
pub struct Server {
    listener: TcpListener,
    router: Router,
    state: AppState,
}

impl Server {
    pub async fn bind(cfg: &ServeConfig) -> std::io::Result<Self> {
        let listener = TcpListener::bind(cfg.addr).await?;
        let state = AppState::new(cfg.tick_ms);
        let router = router(state.clone(), cfg.assets.clone());
        Ok(Self {
            listener,
            router,
            state,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn state(&self) -> &AppState {
        &self.state
    }

    pub async fn run(self) -> std::io::Result<()> {
        axum::serve(self.listener, self.router).await
    }

    pub async fn run_until<F>(self, shutdown: F) -> std::io::Result<()>
    where
        F: std::future::Future<Output = ()> + Send + 'static,
    {
        axum::serve(self.listener, self.router)
            .with_graceful_shutdown(shutdown)
            .await
    }
}

/// Binds to `127.0.0.1:0` on a background runtime thread; returns the base
/// URL. Meant for tests and embedding.
pub fn spawn_background(tick_ms: u64) -> std::io::Result<String> {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::Builder::new().name("otf-service".into()).spawn(move || {
        let rt = match tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build() {
            Ok(rt) => rt,
            Err(e) => {
                let _ = tx.send(Err(e));
                return;
            }
        };
        rt.block_on(async move {
            let cfg = ServeConfig {
                addr: SocketAddr::from(([127, 0, 0, 1], 0)),
                tick_ms,
                assets: None,
            };
            match Server::bind(&cfg).await {
                Ok(server) => {
                    let addr = server.local_addr();
                    let _ = tx.send(addr);
                    let _ = server.run().await;
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                }
            }
        });
    })?;
    let addr = rx
        .recv()
        .map_err(|e| std::io::Error::other(e.to_string()))??;
    Ok(format!("http://{addr}"))
}
