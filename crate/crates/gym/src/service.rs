//! HTTP session service.
//!
//! Routes (JSON bodies):
//!
//! - `GET /puzzles` lists [`PuzzleInfo`]
//! - `GET /puzzles/{id}` returns the [`PuzzleDocument`]
//! - `POST /sessions` takes a [`CreateRequest`], returns a [`CreateResponse`]
//! - `GET /sessions/{id}` returns the current [`Snapshot`]
//! - `POST /sessions/{id}/actions` takes `{"action": 3}` (digit, letter or
//!   name), returns an [`ActionResponse`]
//! - `GET /sessions/{id}/events` is a server-sent event stream of `snapshot`
//!   events: the current snapshot, then one per applied action, ending after
//!   a terminal or expired snapshot
//!
//! Errors are `{"error": {"kind", "message", "legal"?}}` with kinds
//! `NotFound`, `Unavailable`, `BadRequest`, `IllegalAction`, `EpisodeOver`,
//! `SessionExpired` and `Internal`.

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{Stream, StreamExt};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use spatial_gym_core::difficulty::difficulty_level;
use spatial_gym_core::grid::render_grid_tokens;
use spatial_gym_core::metrics::EpisodeStatus;
use spatial_gym_core::{
    Action, EnvConfig, EnvError, EnvState, Mode, Position, ProcessReward, Puzzle, RewardSignal, Status, Verdict,
};
use tokio::sync::broadcast;

use crate::catalog::Catalog;
use crate::document::{PuzzleDocument, PuzzleInfo};
use crate::harness::parse_action_token;
use crate::log::{ActionPayload, Event, LogWriter, ResetPayload, SessionLog, TerminalPayload};

pub const DEFAULT_IDLE_TTL: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    Human,
    #[default]
    Agent,
}

impl Owner {
    fn name(self) -> &'static str {
        match self {
            Owner::Human => "human",
            Owner::Agent => "agent",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub idle_ttl: Duration,
    pub env: EnvConfig,
    /// Seeds puzzle selection by level and session ids.
    pub seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { idle_ttl: DEFAULT_IDLE_TTL, env: EnvConfig::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CreateRequest {
    #[serde(default)]
    pub puzzle_id: Option<String>,
    #[serde(default)]
    pub difficulty_level: Option<u8>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub owner: Owner,
    #[serde(default)]
    pub step_limit: Option<u32>,
    #[serde(default)]
    pub process_reward: Option<ProcessReward>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub session_id: String,
    pub puzzle_id: String,
    pub difficulty_level: Option<u8>,
    pub mode: Mode,
    pub owner: Owner,
    pub status: Status,
    pub terminated: bool,
    pub expired: bool,
    /// Actions applied so far.
    pub step: u32,
    pub position: Position,
    pub legal: Vec<Action>,
    pub path: Vec<Position>,
    /// Puzzle tokens without the path overlay.
    pub grid: Vec<Vec<String>>,
    /// Rendered rows as they appear in the observation.
    pub grid_rows: Vec<String>,
    pub observation_text: String,
    pub cumulative_reward: f64,
    pub verdict: Option<Verdict>,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: String,
    pub snapshot: Snapshot,
    pub observation_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardView {
    pub outcome: i8,
    pub process: f64,
    pub total: f64,
}

impl From<RewardSignal> for RewardView {
    fn from(r: RewardSignal) -> Self {
        RewardView { outcome: r.outcome, process: r.process, total: r.total() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionResponse {
    pub snapshot: Snapshot,
    pub reward: RewardView,
    pub terminated: bool,
    /// Ended by the step limit.
    pub truncated: bool,
    pub backtracked: bool,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Unavailable(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("action {action} is not legal")]
    IllegalAction { action: Action, legal: Vec<Action> },
    #[error("episode is over ({})", .0.name())]
    EpisodeOver(Status),
    #[error("session {0} expired")]
    SessionExpired(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "NotFound",
            ServiceError::Unavailable(_) => "Unavailable",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::IllegalAction { .. } => "IllegalAction",
            ServiceError::EpisodeOver(_) => "EpisodeOver",
            ServiceError::SessionExpired(_) => "SessionExpired",
            ServiceError::Internal(_) => "Internal",
        }
    }

    pub fn status_code(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Unavailable(_) | ServiceError::IllegalAction { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::EpisodeOver(_) => StatusCode::CONFLICT,
            ServiceError::SessionExpired(_) => StatusCode::GONE,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut body = serde_json::json!({"kind": self.kind(), "message": self.to_string()});
        if let ServiceError::IllegalAction { legal, .. } = self {
            body["legal"] = serde_json::to_value(legal).expect("serialisable");
        }
        serde_json::json!({ "error": body })
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status_code(), Json(self.to_json())).into_response()
    }
}

struct Session {
    id: String,
    env: EnvState,
    owner: Owner,
    created_at: String,
    started: Instant,
    last_active: Instant,
    actions: u32,
    cumulative: f64,
    expired: bool,
    log: Option<SessionLog>,
}

impl Session {
    fn snapshot(&self) -> Snapshot {
        let puzzle = self.env.puzzle();
        let terminated = self.env.status().is_terminal();
        Snapshot {
            session_id: self.id.clone(),
            puzzle_id: puzzle.id().to_string(),
            difficulty_level: puzzle.difficulty_score().map(difficulty_level),
            mode: self.env.mode(),
            owner: self.owner,
            status: self.env.status(),
            terminated,
            expired: self.expired,
            step: self.actions,
            position: self.env.path().head(),
            legal: if terminated || self.expired { Vec::new() } else { self.env.legal().to_vec() },
            path: self.env.path().positions().to_vec(),
            grid: puzzle.token_rows(),
            grid_rows: render_grid_tokens(puzzle, Some(self.env.path())),
            observation_text: self.env.observation().text,
            cumulative_reward: self.cumulative,
            verdict: self.env.verdict().cloned(),
            created_at: self.created_at.clone(),
        }
    }

    fn write_log<T: Serialize>(&mut self, event: Event, payload: &T) {
        if let Some(log) = self.log.as_mut() {
            if let Err(e) = log.log(event, payload) {
                eprintln!("warning: session {} log write failed: {e}", self.id);
            }
        }
    }

    fn write_terminal(&mut self, status: EpisodeStatus) {
        let payload = TerminalPayload {
            status,
            total_actions: self.actions,
            forward_edges: self.env.path().edge_count() as u32,
            wall_time_ms: self.started.elapsed().as_millis() as u64,
            verdict: self.env.verdict().cloned(),
            error: None,
        };
        self.write_log(Event::Terminal, &payload);
    }

    /// Marks an idle running session expired; returns true if it just expired.
    fn check_expiry(&mut self, ttl: Duration, now: Instant) -> bool {
        if self.expired || self.env.status().is_terminal() || now.duration_since(self.last_active) < ttl {
            return false;
        }
        self.expired = true;
        self.write_terminal(EpisodeStatus::Abandoned);
        true
    }
}

struct Slot {
    session: Mutex<Session>,
    updates: broadcast::Sender<Snapshot>,
}

impl Slot {
    fn lock(&self) -> std::sync::MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(|e| e.into_inner())
    }
}

struct Inner {
    catalog: Catalog,
    config: ServiceConfig,
    log: Option<Arc<LogWriter>>,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    rng: Mutex<StdRng>,
    counter: AtomicU64,
}

/// Shared handle; cheap to clone.
#[derive(Clone)]
pub struct SessionService {
    inner: Arc<Inner>,
}

impl SessionService {
    pub fn new(catalog: Catalog, config: ServiceConfig, log: Option<Arc<LogWriter>>) -> SessionService {
        let rng = StdRng::seed_from_u64(config.seed);
        SessionService {
            inner: Arc::new(Inner {
                catalog,
                config,
                log,
                sessions: Mutex::new(HashMap::new()),
                rng: Mutex::new(rng),
                counter: AtomicU64::new(0),
            }),
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.inner.catalog
    }

    pub fn list_puzzles(&self) -> Vec<PuzzleInfo> {
        self.inner.catalog.puzzles().map(|p| PuzzleInfo::of(p)).collect()
    }

    pub fn puzzle_document(&self, id: &str) -> Result<PuzzleDocument, ServiceError> {
        let puzzle = self.inner.catalog.get(id).ok_or_else(|| ServiceError::NotFound(format!("unknown puzzle {id}")))?;
        Ok(PuzzleDocument::from_puzzle(&puzzle, None))
    }

    fn pick(&self, candidates: &[Arc<Puzzle>]) -> Arc<Puzzle> {
        let k = self.inner.rng.lock().unwrap_or_else(|e| e.into_inner()).random_range(0..candidates.len());
        candidates[k].clone()
    }

    fn select(&self, request: &CreateRequest) -> Result<Arc<Puzzle>, ServiceError> {
        if let Some(id) = &request.puzzle_id {
            return self.inner.catalog.get(id).ok_or_else(|| ServiceError::NotFound(format!("unknown puzzle {id}")));
        }
        let candidates: Vec<Arc<Puzzle>> = match request.difficulty_level {
            Some(level) if !(1..=5).contains(&level) => {
                return Err(ServiceError::Unavailable(format!("difficulty level {level} is outside 1..=5")))
            }
            Some(level) => self.inner.catalog.at_level(level),
            None => self.inner.catalog.puzzles().cloned().collect(),
        };
        if candidates.is_empty() {
            let what = request.difficulty_level.map_or("any level".to_string(), |l| format!("level {l}"));
            return Err(ServiceError::Unavailable(format!("no puzzle available at {what}")));
        }
        Ok(self.pick(&candidates))
    }

    fn new_session_id(&self) -> String {
        let r: u64 = self.inner.rng.lock().unwrap_or_else(|e| e.into_inner()).random();
        let n = self.inner.counter.fetch_add(1, Ordering::Relaxed);
        format!("{r:016x}{n:06x}")
    }

    /// May enumerate solutions for process rewards; call off the async runtime.
    pub fn create_session(&self, request: &CreateRequest) -> Result<CreateResponse, ServiceError> {
        let puzzle = self.select(request)?;
        let mut config = self.inner.config.env;
        if let Some(limit) = request.step_limit {
            if limit == 0 {
                return Err(ServiceError::BadRequest("step_limit must be positive".into()));
            }
            config.step_limit = limit;
        }
        if let Some(pr) = request.process_reward {
            config.process_reward = pr;
        }
        let solutions = (config.process_reward != ProcessReward::Disabled)
            .then(|| self.inner.catalog.solutions(puzzle.id(), config.budget))
            .flatten();
        let (env, obs) = EnvState::reset(puzzle.clone(), request.mode, config, solutions).map_err(|e| match e {
            EnvError::UnsolvablePuzzle => {
                ServiceError::Unavailable(format!("puzzle {} has no solution; process rewards need one", puzzle.id()))
            }
            other => ServiceError::Internal(other.to_string()),
        })?;
        let id = self.new_session_id();
        let now = Instant::now();
        let mut session = Session {
            id: id.clone(),
            env,
            owner: request.owner,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            started: now,
            last_active: now,
            actions: 0,
            cumulative: 0.0,
            expired: false,
            log: self.inner.log.as_ref().map(|w| SessionLog::new(w.clone(), id.clone(), puzzle.id())),
        };
        session.write_log(
            Event::Reset,
            &ResetPayload {
                mode: request.mode,
                agent: request.owner.name().to_string(),
                config,
                puzzle: PuzzleDocument::from_puzzle(&puzzle, None),
                observation_text: obs.text.clone(),
            },
        );
        let snapshot = session.snapshot();
        let (updates, _) = broadcast::channel(64);
        let slot = Arc::new(Slot { session: Mutex::new(session), updates });
        self.inner.sessions.lock().unwrap_or_else(|e| e.into_inner()).insert(id.clone(), slot);
        Ok(CreateResponse { session_id: id, observation_text: obs.text, snapshot })
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ServiceError> {
        self.inner
            .sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown session {id}")))
    }

    pub fn snapshot(&self, id: &str) -> Result<Snapshot, ServiceError> {
        let slot = self.slot(id)?;
        let mut session = slot.lock();
        if session.check_expiry(self.inner.config.idle_ttl, Instant::now()) {
            let _ = slot.updates.send(session.snapshot());
        }
        Ok(session.snapshot())
    }

    /// Applies one action. Calls on the same session are serialised by its lock.
    pub fn apply_action(&self, id: &str, action: Action) -> Result<ActionResponse, ServiceError> {
        let slot = self.slot(id)?;
        let mut session = slot.lock();
        if session.check_expiry(self.inner.config.idle_ttl, Instant::now()) {
            let _ = slot.updates.send(session.snapshot());
        }
        if session.expired {
            return Err(ServiceError::SessionExpired(id.to_string()));
        }
        let t = session.env.step(action).map_err(|e| match e {
            EnvError::IllegalAction { action, legal } => ServiceError::IllegalAction { action, legal: legal.to_vec() },
            EnvError::EpisodeOver(status) => ServiceError::EpisodeOver(status),
            other => ServiceError::Internal(other.to_string()),
        })?;
        session.actions += 1;
        session.cumulative += t.reward.total();
        session.last_active = Instant::now();
        let payload = ActionPayload {
            step: session.env.step_count(),
            action,
            raw_response: None,
            retries: 0,
            tokens: None,
            reward: t.reward,
            backtracked: t.backtracked,
            observation_text: t.observation.text.clone(),
        };
        session.write_log(Event::Action, &payload);
        if t.terminated {
            session.write_terminal(EpisodeStatus::from_env(t.status));
        }
        let snapshot = session.snapshot();
        let _ = slot.updates.send(snapshot.clone());
        Ok(ActionResponse {
            snapshot,
            reward: t.reward.into(),
            terminated: t.terminated,
            truncated: t.status == Status::StepLimit,
            backtracked: t.backtracked,
            verdict: session.env.verdict().cloned(),
        })
    }

    /// Current snapshot plus a receiver for later ones, taken atomically.
    pub fn subscribe(&self, id: &str) -> Result<(Snapshot, broadcast::Receiver<Snapshot>), ServiceError> {
        let slot = self.slot(id)?;
        let session = slot.lock();
        Ok((session.snapshot(), slot.updates.subscribe()))
    }

    /// Expires idle running sessions (logged as abandoned) and drops
    /// finished sessions idle for more than two TTLs. Returns the number expired.
    pub fn sweep(&self, now: Instant) -> usize {
        let ttl = self.inner.config.idle_ttl;
        let mut sessions = self.inner.sessions.lock().unwrap_or_else(|e| e.into_inner());
        let mut expired = 0;
        sessions.retain(|_, slot| {
            let mut session = slot.lock();
            if session.check_expiry(ttl, now) {
                expired += 1;
                let _ = slot.updates.send(session.snapshot());
            }
            let finished = session.expired || session.env.status().is_terminal();
            !(finished && now.duration_since(session.last_active) >= ttl * 2)
        });
        expired
    }
}

async fn list_puzzles(State(s): State<SessionService>) -> Json<Vec<PuzzleInfo>> {
    Json(s.list_puzzles())
}

async fn get_puzzle(State(s): State<SessionService>, UrlPath(id): UrlPath<String>) -> Result<Json<PuzzleDocument>, ServiceError> {
    s.puzzle_document(&id).map(Json)
}

fn bad_json(e: JsonRejection) -> ServiceError {
    ServiceError::BadRequest(e.body_text())
}

async fn create_session(
    State(s): State<SessionService>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateResponse>), ServiceError> {
    let Json(request) = body.map_err(bad_json)?;
    let response = tokio::task::spawn_blocking(move || s.create_session(&request))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(response)))
}

async fn get_session(State(s): State<SessionService>, UrlPath(id): UrlPath<String>) -> Result<Json<Snapshot>, ServiceError> {
    s.snapshot(&id).map(Json)
}

#[derive(Deserialize)]
struct ActionRequest {
    action: serde_json::Value,
}

fn decode_action(value: &serde_json::Value) -> Result<Action, ServiceError> {
    let action = match value {
        serde_json::Value::Number(n) => n.as_u64().and_then(|d| u8::try_from(d).ok()).and_then(Action::from_digit),
        serde_json::Value::String(s) => parse_action_token(s),
        _ => None,
    };
    action.ok_or_else(|| ServiceError::BadRequest(format!("unrecognised action {value}")))
}

async fn apply_action(
    State(s): State<SessionService>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ActionRequest>, JsonRejection>,
) -> Result<Json<ActionResponse>, ServiceError> {
    let Json(request) = body.map_err(bad_json)?;
    let action = decode_action(&request.action)?;
    s.apply_action(&id, action).map(Json)
}

fn snapshot_event(snapshot: &Snapshot) -> Result<SseEvent, Infallible> {
    Ok(SseEvent::default().event("snapshot").json_data(snapshot).expect("serialisable"))
}

async fn session_events(
    State(s): State<SessionService>,
    UrlPath(id): UrlPath<String>,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, ServiceError> {
    let (initial, rx) = s.subscribe(&id)?;
    let done = initial.terminated || initial.expired;
    let rest = futures::stream::unfold((rx, done), |(mut rx, done)| async move {
        if done {
            return None;
        }
        loop {
            match rx.recv().await {
                Ok(snapshot) => {
                    let done = snapshot.terminated || snapshot.expired;
                    return Some((snapshot, (rx, done)));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    let stream = futures::stream::once(async move { initial }).chain(rest).map(|snap| snapshot_event(&snap));
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

pub fn router(service: SessionService) -> Router {
    Router::new()
        .route("/puzzles", get(list_puzzles))
        .route("/puzzles/{id}", get(get_puzzle))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/actions", post(apply_action))
        .route("/sessions/{id}/events", get(session_events))
        .with_state(service)
}

/// Serves until the listener fails, sweeping idle sessions once a minute.
pub async fn serve(listener: tokio::net::TcpListener, service: SessionService) -> std::io::Result<()> {
    let sweeper = service.clone();
    let period = sweeper.inner.config.idle_ttl.min(Duration::from_secs(60));
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(period);
        loop {
            interval.tick().await;
            sweeper.sweep(Instant::now());
        }
    });
    axum::serve(listener, router(service)).await
}

/// Binds `addr` and serves in a background task; returns the bound address.
pub async fn spawn(addr: SocketAddr, service: SessionService) -> std::io::Result<SocketAddr> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = serve(listener, service).await {
            eprintln!("error: service stopped: {e}");
        }
    });
    Ok(local)
}
