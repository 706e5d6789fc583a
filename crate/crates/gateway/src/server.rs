//! HTTP and WebSocket service. Scenarios, policies and event logs live as
//! files under a data directory; each simulation runs on its own thread and
//! takes commands through a queue drained once per tick.

use std::collections::HashMap;
use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use metis_core::dynamics::TICK_SECONDS;
use metis_core::ppo::Policy;
use metis_core::sim::{EndCondition, Frame, SimError, SimResults, Simulation};
use metis_core::world::{load_scenario, save_scenario, validate, FireSource, ValidationIssue};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::{oneshot, watch, RwLock};

/// Minimum spacing of stream frames (at most 30 per second).
pub const FRAME_INTERVAL: Duration = Duration::from_micros(33_334);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStatus {
    Created,
    Running,
    Paused,
    Ended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlAction {
    Start,
    Pause,
    Resume,
    Stop,
}

enum Command {
    Run(bool),
    Stop,
    Inject(FireSource, oneshot::Sender<Result<u64, SimError>>),
}

/// Latest state published to stream subscribers.
#[derive(Debug, Clone)]
enum StreamMsg {
    Frame(Frame),
    Ended(SimResults),
}

impl StreamMsg {
    fn to_json(&self) -> String {
        match self {
            Self::Frame(f) => serde_json::to_string(f),
            Self::Ended(r) => serde_json::to_string(&json!({ "event": "ended", "results": r })),
        }
        .expect("stream message serializes")
    }
}

#[derive(Debug, Clone, Serialize)]
struct HandleInfo {
    id: String,
    scenario_id: String,
    status: SimStatus,
    seed: u64,
    end_conditions: Vec<EndCondition>,
    policy: String,
}

struct SimHandle {
    info: Mutex<HandleInfo>,
    control: Mutex<mpsc::Sender<Command>>,
    stream: watch::Receiver<StreamMsg>,
    results: Arc<Mutex<Option<SimResults>>>,
    thread: Mutex<Option<JoinHandle<()>>>,
}

/// Shared service state.
pub struct AppState {
    data: PathBuf,
    scenario_locks: Mutex<HashMap<String, Arc<RwLock<()>>>>,
    sims: Mutex<HashMap<String, Arc<SimHandle>>>,
}

impl AppState {
    pub fn new(data: impl Into<PathBuf>) -> io::Result<Arc<Self>> {
        let data = data.into();
        for sub in ["scenarios", "policies", "logs"] {
            std::fs::create_dir_all(data.join(sub))?;
        }
        Ok(Arc::new(Self { data, scenario_locks: Mutex::default(), sims: Mutex::default() }))
    }

    fn scenario_path(&self, id: &str) -> PathBuf {
        self.data.join("scenarios").join(format!("{id}.json"))
    }

    fn lock_for(&self, id: &str) -> Arc<RwLock<()>> {
        self.scenario_locks.lock().unwrap().entry(id.to_string()).or_default().clone()
    }

    fn sim(&self, id: &str) -> Result<Arc<SimHandle>, ApiError> {
        self.sims.lock().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found("simulation", id))
    }

    /// Stops every simulation and waits for its log to be written.
    pub fn shutdown(&self) {
        let handles: Vec<_> = self.sims.lock().unwrap().values().cloned().collect();
        for h in &handles {
            let _ = h.control.lock().unwrap().send(Command::Stop);
        }
        for h in handles {
            if let Some(t) = h.thread.lock().unwrap().take() {
                let _ = t.join();
            }
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, body: json!({ "error": message.into() }) }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("{what} {id:?} not found"))
    }

    fn issues(status: StatusCode, message: &str, issues: &[ValidationIssue]) -> Self {
        Self { status, body: json!({ "error": message, "issues": issues }) }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Ids double as file names, so keep them to a safe alphabet.
fn check_id(id: &str) -> ApiResult<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ApiError::new(StatusCode::BAD_REQUEST, format!("invalid id {id:?}")))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/scenarios", get(list_scenarios).post(create_scenario))
        .route("/scenarios/{id}", get(get_scenario).put(put_scenario).delete(delete_scenario))
        .route("/scenarios/{id}/validate", post(validate_scenario))
        .route("/simulations", post(create_simulation))
        .route("/simulations/{id}", get(get_simulation))
        .route("/simulations/{id}/control", post(control_simulation))
        .route("/simulations/{id}/fires", post(inject_fire))
        .route("/simulations/{id}/results", get(simulation_results))
        .route("/simulations/{id}/stream", get(stream))
        .with_state(state)
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn list_scenarios(State(st): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let mut out = Vec::new();
    let mut entries = tokio::fs::read_dir(st.data.join("scenarios")).await.map_err(ApiError::internal)?;
    while let Some(e) = entries.next_entry().await.map_err(ApiError::internal)? {
        let path = e.path();
        if path.extension().is_some_and(|x| x == "json") {
            if let Ok(s) = load_scenario(&tokio::fs::read(&path).await.map_err(ApiError::internal)?) {
                out.push(json!({ "id": s.id, "name": s.name }));
            }
        }
    }
    out.sort_by(|a, b| a["id"].as_str().cmp(&b["id"].as_str()));
    Ok(Json(Value::Array(out)))
}

fn parse_scenario(body: &[u8]) -> ApiResult<metis_core::world::Scenario> {
    load_scenario(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))
}

async fn create_scenario(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let mut s = parse_scenario(&body)?;
    if s.id.is_empty() {
        s.id = uuid::Uuid::new_v4().simple().to_string();
    }
    check_id(&s.id)?;
    let lock = st.lock_for(&s.id);
    let _guard = lock.write().await;
    let path = st.scenario_path(&s.id);
    if path.exists() {
        return Err(ApiError::new(StatusCode::CONFLICT, format!("scenario {:?} already exists", s.id)));
    }
    tokio::fs::write(&path, save_scenario(&s)).await.map_err(ApiError::internal)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": s.id }))))
}

async fn get_scenario(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    check_id(&id)?;
    let lock = st.lock_for(&id);
    let _guard = lock.read().await;
    let bytes = tokio::fs::read(st.scenario_path(&id)).await.map_err(|_| ApiError::not_found("scenario", &id))?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn put_scenario(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    check_id(&id)?;
    let mut s = parse_scenario(&body)?;
    s.id = id.clone();
    let lock = st.lock_for(&id);
    let _guard = lock.write().await;
    let path = st.scenario_path(&id);
    let status = if path.exists() { StatusCode::OK } else { StatusCode::CREATED };
    tokio::fs::write(&path, save_scenario(&s)).await.map_err(ApiError::internal)?;
    Ok((status, Json(json!({ "id": id }))))
}

async fn delete_scenario(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<StatusCode> {
    check_id(&id)?;
    let lock = st.lock_for(&id);
    let _guard = lock.write().await;
    tokio::fs::remove_file(st.scenario_path(&id)).await.map_err(|_| ApiError::not_found("scenario", &id))?;
    Ok(StatusCode::NO_CONTENT)
}

async fn read_scenario(st: &AppState, id: &str) -> ApiResult<metis_core::world::Scenario> {
    check_id(id)?;
    let lock = st.lock_for(id);
    let _guard = lock.read().await;
    let bytes = tokio::fs::read(st.scenario_path(id)).await.map_err(|_| ApiError::not_found("scenario", id))?;
    load_scenario(&bytes).map_err(ApiError::internal)
}

async fn validate_scenario(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let s = read_scenario(&st, &id).await?;
    let issues = validate(&s);
    Ok(Json(json!({ "valid": issues.is_empty(), "issues": issues })))
}

fn default_end() -> Vec<EndCondition> {
    vec![EndCondition::AllResolved]
}

fn default_rtf() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
struct CreateSimulation {
    scenario_id: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_end")]
    end_conditions: Vec<EndCondition>,
    /// File name under `policies/`.
    policy: String,
    /// Simulated seconds per wall second; 0 runs unpaced.
    #[serde(default = "default_rtf")]
    real_time_factor: f64,
}

fn sim_error(e: SimError) -> ApiError {
    match e {
        SimError::Invalid(issues) => ApiError::issues(StatusCode::UNPROCESSABLE_ENTITY, "scenario is invalid", &issues),
        SimError::InvalidSource(issues) => {
            ApiError::issues(StatusCode::UNPROCESSABLE_ENTITY, "invalid fire source", &issues)
        }
        SimError::SimEnded => ApiError::new(StatusCode::CONFLICT, e.to_string()),
        other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, other.to_string()),
    }
}

async fn create_simulation(
    State(st): State<Arc<AppState>>,
    Json(req): Json<CreateSimulation>,
) -> ApiResult<(StatusCode, Json<HandleInfo>)> {
    let scenario = read_scenario(&st, &req.scenario_id).await?;
    check_id(&req.policy)?;
    let bytes = tokio::fs::read(st.data.join("policies").join(&req.policy))
        .await
        .map_err(|_| ApiError::not_found("policy", &req.policy))?;
    let policy = Policy::from_bytes(&bytes).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    if !(req.real_time_factor >= 0.0) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "real_time_factor must be non-negative"));
    }
    let sim = Simulation::new(&scenario, &policy, req.end_conditions.clone(), req.seed).map_err(sim_error)?;

    let id = uuid::Uuid::new_v4().simple().to_string();
    let info = HandleInfo {
        id: id.clone(),
        scenario_id: req.scenario_id,
        status: SimStatus::Created,
        seed: req.seed,
        end_conditions: req.end_conditions,
        policy: req.policy,
    };
    let (tx, rx) = mpsc::channel();
    let (frames_tx, frames_rx) = watch::channel(StreamMsg::Frame(sim.frame()));
    let results = Arc::new(Mutex::new(None));
    let handle = Arc::new(SimHandle {
        info: Mutex::new(info.clone()),
        control: Mutex::new(tx),
        stream: frames_rx,
        results: results.clone(),
        thread: Mutex::new(None),
    });
    let log_path = st.data.join("logs").join(format!("{id}.ndjson"));
    let pace = (req.real_time_factor > 0.0).then(|| Duration::from_secs_f64(TICK_SECONDS / req.real_time_factor));
    let weak = Arc::downgrade(&handle);
    let thread = std::thread::spawn(move || {
        drive(sim, rx, frames_tx, pace, &log_path, &results);
        if let Some(h) = weak.upgrade() {
            h.info.lock().unwrap().status = SimStatus::Ended;
        }
    });
    *handle.thread.lock().unwrap() = Some(thread);
    st.sims.lock().unwrap().insert(id, handle);
    Ok((StatusCode::CREATED, Json(info)))
}

/// Simulation thread: drains commands once per tick, steps while running,
/// publishes frames, and writes the event log when the run ends.
fn drive(
    mut sim: Simulation,
    rx: mpsc::Receiver<Command>,
    frames: watch::Sender<StreamMsg>,
    pace: Option<Duration>,
    log_path: &Path,
    results: &Mutex<Option<SimResults>>,
) {
    let mut running = false;
    let mut next = Instant::now();
    while !sim.is_ended() {
        loop {
            let cmd = if running {
                match rx.try_recv() {
                    Ok(c) => c,
                    Err(mpsc::TryRecvError::Empty) => break,
                    Err(mpsc::TryRecvError::Disconnected) => Command::Stop,
                }
            } else {
                rx.recv().unwrap_or(Command::Stop)
            };
            match cmd {
                Command::Run(r) => {
                    running = r;
                    next = Instant::now();
                }
                Command::Stop => {
                    let _ = sim.stop();
                }
                Command::Inject(source, reply) => {
                    let _ = reply.send(sim.inject_fire(source));
                }
            }
            if sim.is_ended() {
                break;
            }
        }
        if sim.is_ended() {
            break;
        }
        let _ = sim.step();
        frames.send_replace(StreamMsg::Frame(sim.frame()));
        if let Some(p) = pace {
            next += p;
            if let Some(wait) = next.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
    }
    if let Err(e) = std::fs::write(log_path, sim.event_log()) {
        tracing::error!("writing {}: {e}", log_path.display());
    }
    let r = *sim.results().expect("ended");
    *results.lock().unwrap() = Some(r);
    frames.send_replace(StreamMsg::Frame(sim.frame()));
    frames.send_replace(StreamMsg::Ended(r));
}

async fn get_simulation(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<HandleInfo>> {
    let h = st.sim(&id)?;
    let info = h.info.lock().unwrap().clone();
    Ok(Json(info))
}

#[derive(Debug, Deserialize)]
struct ControlBody {
    action: ControlAction,
}

async fn control_simulation(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<ControlBody>,
) -> ApiResult<Json<HandleInfo>> {
    let h = st.sim(&id)?;
    let mut info = h.info.lock().unwrap();
    use ControlAction::*;
    use SimStatus::*;
    let (next, cmd) = match (info.status, body.action) {
        (Created, Start) | (Paused, Resume) => (Running, Command::Run(true)),
        (Running, Pause) => (Paused, Command::Run(false)),
        (Created | Running | Paused, Stop) => (Ended, Command::Stop),
        (status, action) => {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("cannot {action:?} a simulation that is {status:?}").to_lowercase(),
            ))
        }
    };
    // the thread may have just finished on its own
    if h.results.lock().unwrap().is_some() {
        info.status = Ended;
        return Err(ApiError::new(StatusCode::CONFLICT, "simulation has ended"));
    }
    h.control.lock().unwrap().send(cmd).map_err(|_| ApiError::new(StatusCode::CONFLICT, "simulation has ended"))?;
    info.status = next;
    Ok(Json(info.clone()))
}

async fn inject_fire(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(source): Json<FireSource>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let h = st.sim(&id)?;
    let (tx, rx) = oneshot::channel();
    let ended = || ApiError::new(StatusCode::CONFLICT, "simulation has ended");
    h.control.lock().unwrap().send(Command::Inject(source, tx)).map_err(|_| ended())?;
    let tick = rx.await.map_err(|_| ended())?.map_err(sim_error)?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "effective_tick": tick }))))
}

async fn simulation_results(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<SimResults>> {
    let h = st.sim(&id)?;
    let r = *h.results.lock().unwrap();
    r.map(Json).ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "simulation has not ended"))
}

async fn stream(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    ws: WebSocketUpgrade,
) -> ApiResult<Response> {
    let h = st.sim(&id)?;
    let rx = h.stream.clone();
    Ok(ws.on_upgrade(move |socket| pump(socket, rx)))
}

/// Sends the latest frame at most every [`FRAME_INTERVAL`], then the ended
/// record, then closes.
async fn pump(mut socket: WebSocket, mut rx: watch::Receiver<StreamMsg>) {
    loop {
        let msg = rx.borrow_and_update().clone();
        if socket.send(Message::Text(msg.to_json().into())).await.is_err() {
            return;
        }
        if matches!(msg, StreamMsg::Ended(_)) {
            let _ = socket.send(Message::Close(None)).await;
            return;
        }
        tokio::time::sleep(FRAME_INTERVAL).await;
        if rx.changed().await.is_err() && !rx.has_changed().unwrap_or(false) {
            // sender gone: the last value is the ended record, send it once more
            let last = rx.borrow().clone();
            let _ = socket.send(Message::Text(last.to_json().into())).await;
            return;
        }
    }
}

/// Serves until `shutdown` resolves, then stops all simulations and flushes their logs.
pub async fn serve(listener: TcpListener, state: Arc<AppState>, shutdown: impl Future<Output = ()> + Send + 'static) -> io::Result<()> {
    let app = router(state.clone());
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    tokio::task::spawn_blocking(move || state.shutdown()).await.map_err(io::Error::other)?;
    Ok(())
}

/// Entry point for `metis serve`.
pub fn serve_blocking(addr: SocketAddr, data: PathBuf) -> io::Result<()> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .try_init();
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let state = AppState::new(&data)?;
        let listener = TcpListener::bind(addr).await?;
        tracing::info!("listening on {}", listener.local_addr()?);
        serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await
    })
}
