//! JSON HTTP API over the session engine.
//!
//! Each session sits behind its own mutex; provider calls run on the blocking
//! pool while that mutex is held, so turns for one session are serialized and
//! different sessions proceed independently.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::Rng;
use reverie_core::agent::GatewayError;
use reverie_core::minigames::{MiniGameEvent, MiniGameState};
use reverie_core::session::{DialogueRound, SafeModeReason};
use reverie_core::{
    DriverError, EngineConfig, EventPayload, GameDriver, Phase, PlayerProfile, SceneSpec, SessionError,
    SessionState,
};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::store::{EventStore, StorageError};

/// How many recent request ids each session remembers.
pub const DEDUP_WINDOW: usize = 100;

pub const SAFE_MODE_NOTICE: &str = "The session has been paused for your safety. Please contact a local hospital \
or mental health service, or an emergency line if you are in danger.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiniGameView {
    pub game: String,
    pub state: MiniGameState,
}

/// Client-facing snapshot. Never carries prompts or credentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSessionView {
    pub session_id: Uuid,
    pub phase: Phase,
    pub round_index: u32,
    pub cumulative_score: f64,
    pub pass_threshold: f64,
    pub progress_fraction: f64,
    pub cloud_opacity: f64,
    pub scene: Option<SceneSpec>,
    pub npc_reply: Option<String>,
    pub suggested_replies: Vec<String>,
    pub active_minigame: Option<MiniGameView>,
    pub safe_mode: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub safe_mode_notice: Option<String>,
}

impl ApiSessionView {
    pub fn of(s: &SessionState) -> Self {
        let latest = s.latest_round();
        let npc_reply = latest
            .map(|r| r.turn.turn.npc_reply.clone())
            .or_else(|| s.pending_npc_prompt.clone());
        ApiSessionView {
            session_id: s.session_id,
            phase: s.phase,
            round_index: s.round_index,
            cumulative_score: s.cumulative_score,
            pass_threshold: s.pass_threshold,
            progress_fraction: s.progress_fraction(),
            cloud_opacity: s.cloud_opacity(),
            scene: s.scene.clone(),
            npc_reply,
            suggested_replies: latest.map(|r| r.turn.turn.suggested_replies.clone()).unwrap_or_default(),
            active_minigame: s.active_minigame.as_ref().map(|g| MiniGameView {
                game: g.kind().to_string(),
                state: g.clone(),
            }),
            safe_mode: s.is_safe_mode(),
            safe_mode_notice: s.is_safe_mode().then(|| SAFE_MODE_NOTICE.to_string()),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranscriptView {
    pub session_id: Uuid,
    pub phase: Phase,
    pub rounds: Vec<DialogueRound>,
    pub safe_mode_reason: Option<SafeModeReason>,
}

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    pub profile: PlayerProfile,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub struct TurnRequest {
    pub text: String,
    #[serde(default)]
    pub request_id: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct VasRequest {
    pub value: f64,
    #[serde(default)]
    pub day: Option<u32>,
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(Uuid),
    Conflict(String),
    Upstream(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(id) => (StatusCode::NOT_FOUND, format!("no session {id}")),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Upstream(m) => (StatusCode::BAD_GATEWAY, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(serde_json::json!({ "error": message }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::WrongPhase { .. } => ApiError::Conflict(e.to_string()),
            SessionError::Replay(_) => ApiError::Internal(e.to_string()),
            _ => ApiError::BadRequest(e.to_string()),
        }
    }
}

impl From<DriverError> for ApiError {
    fn from(e: DriverError) -> Self {
        match e {
            DriverError::Session(s) => s.into(),
            // upstream detail stays in the server log; the client only learns the category
            DriverError::Gateway(g) => {
                tracing::warn!(error = %g, "provider call failed");
                ApiError::Upstream(match g {
                    GatewayError::Provider(p) => format!("language model provider failed ({})", provider_kind(&p)),
                    GatewayError::Contract(_) => "language model reply did not match the turn contract".into(),
                })
            }
        }
    }
}

fn provider_kind(e: &reverie_core::agent::ProviderError) -> String {
    use reverie_core::agent::ProviderError as P;
    match e {
        P::Transport(_) => "transport".into(),
        P::Status { status, .. } => format!("HTTP {status}"),
        P::Timeout => "timeout".into(),
        P::BadResponse(_) => "bad response".into(),
        P::EmptyScene => "empty scene".into(),
        P::ScriptExhausted(_) => "script exhausted".into(),
        P::MissingApiKey(_) => "not configured".into(),
        P::Precondition(_) | P::UnknownProvider(_) | P::Config(_) => "configuration".into(),
    }
}

impl From<StorageError> for ApiError {
    fn from(e: StorageError) -> Self {
        tracing::error!(error = %e, "storage failure");
        ApiError::Internal("storage failure".into())
    }
}

struct Slot {
    state: SessionState,
    recent: VecDeque<(String, ApiSessionView)>,
}

type SlotRef = Arc<Mutex<Slot>>;

pub struct AppState {
    driver: GameDriver,
    store: EventStore,
    config: EngineConfig,
    sessions: Mutex<HashMap<Uuid, SlotRef>>,
}

impl AppState {
    /// Replays every stored log. Logs that fail to replay are skipped with an error.
    pub fn new(driver: GameDriver, store: EventStore, config: EngineConfig) -> Result<Arc<Self>, StorageError> {
        let mut sessions = HashMap::new();
        for id in store.session_ids()? {
            match store.replay(driver.engine(), id) {
                Ok(r) => {
                    if let Some(w) = r.warning {
                        tracing::warn!(session = %id, "{w}");
                    }
                    sessions.insert(
                        id,
                        Arc::new(Mutex::new(Slot {
                            state: r.state,
                            recent: VecDeque::new(),
                        })),
                    );
                }
                Err(e) => tracing::error!(session = %id, error = %e, "skipping unreadable session log"),
            }
        }
        tracing::info!(sessions = sessions.len(), "recovered sessions");
        Ok(Arc::new(AppState {
            driver,
            store,
            config,
            sessions: Mutex::new(sessions),
        }))
    }

    fn slot(&self, id: Uuid) -> Result<SlotRef, ApiError> {
        self.sessions
            .lock()
            .expect("session map")
            .get(&id)
            .cloned()
            .ok_or(ApiError::NotFound(id))
    }
}

/// Runs `f` on the blocking pool with the session locked.
async fn with_slot<T, F>(app: &Arc<AppState>, id: Uuid, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&AppState, &mut Slot) -> Result<T, ApiError> + Send + 'static,
{
    let slot = app.slot(id)?;
    let app = app.clone();
    tokio::task::spawn_blocking(move || {
        let mut guard = slot.lock().unwrap_or_else(|p| p.into_inner());
        f(&app, &mut guard)
    })
    .await
    .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?
}

/// Persists first, then publishes the new state; a failed write leaves the slot unchanged.
fn commit(app: &AppState, slot: &mut Slot, next: SessionState, events: &[EventPayload]) -> Result<(), ApiError> {
    app.store.append(next.session_id, events)?;
    slot.state = next;
    Ok(())
}

async fn create(State(app): State<Arc<AppState>>, body: Result<Json<CreateRequest>, JsonRejection>) -> Result<Json<ApiSessionView>, ApiError> {
    let Json(req) = body?;
    let seed = req.seed.unwrap_or_else(|| rand::rng().random());
    let worker = app.clone();
    let view = tokio::task::spawn_blocking(move || -> Result<ApiSessionView, ApiError> {
        let id = reverie_core::session::session_id_for_seed(seed);
        if worker.sessions.lock().expect("session map").contains_key(&id) || worker.store.exists(id) {
            return Err(ApiError::Conflict(format!("a session with seed {seed} already exists")));
        }
        let (state, events) = worker.driver.start(req.profile, worker.config, seed)?;
        worker.store.append(state.session_id, &events)?;
        let view = ApiSessionView::of(&state);
        worker.sessions.lock().expect("session map").insert(
            state.session_id,
            Arc::new(Mutex::new(Slot {
                state,
                recent: VecDeque::new(),
            })),
        );
        Ok(view)
    })
    .await
    .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))??;
    Ok(Json(view))
}

async fn turn(
    State(app): State<Arc<AppState>>,
    Path(id): Path<Uuid>,
    body: Result<Json<TurnRequest>, JsonRejection>,
) -> Result<Json<ApiSessionView>, ApiError> {
    let Json(req) = body?;
    with_slot(&app, id, move |app, slot| {
        if let Some(rid) = &req.request_id {
            if let Some((_, view)) = slot.recent.iter().find(|(r, _)| r == rid) {
                return Ok(view.clone());
            }
        }
        let mut next = slot.state.clone();
        let played = app.driver.play_turn(&mut next, &req.text)?;
        commit(app, slot, next, &played.events)?;
        let view = ApiSessionView::of(&slot.state);
        if let Some(rid) = req.request_id {
            slot.recent.push_back((rid, view.clone()));
            if slot.recent.len() > DEDUP_WINDOW {
                slot.recent.pop_front();
            }
        }
        Ok(view)
    })
    .await
    .map(Json)
}

async fn minigame_event(
    State(app): State<Arc<AppState>>,
    Path(id): Path<Uuid>,
    body: Result<Json<MiniGameEvent>, JsonRejection>,
) -> Result<Json<ApiSessionView>, ApiError> {
    let Json(event) = body?;
    with_slot(&app, id, move |app, slot| {
        let mut next = slot.state.clone();
        let (_, events) = app.driver.engine().handle_minigame_event(&mut next, event)?;
        commit(app, slot, next, &events)?;
        Ok(ApiSessionView::of(&slot.state))
    })
    .await
    .map(Json)
}

async fn exit(State(app): State<Arc<AppState>>, Path(id): Path<Uuid>) -> Result<Json<ApiSessionView>, ApiError> {
    with_slot(&app, id, move |app, slot| {
        let mut next = slot.state.clone();
        let events = app.driver.engine().exit_session(&mut next)?;
        commit(app, slot, next, &events)?;
        Ok(ApiSessionView::of(&slot.state))
    })
    .await
    .map(Json)
}

async fn view(State(app): State<Arc<AppState>>, Path(id): Path<Uuid>) -> Result<Json<ApiSessionView>, ApiError> {
    let slot = app.slot(id)?;
    let guard = slot.lock().unwrap_or_else(|p| p.into_inner());
    Ok(Json(ApiSessionView::of(&guard.state)))
}

async fn transcript(State(app): State<Arc<AppState>>, Path(id): Path<Uuid>) -> Result<Json<TranscriptView>, ApiError> {
    let slot = app.slot(id)?;
    let s = &slot.lock().unwrap_or_else(|p| p.into_inner()).state;
    Ok(Json(TranscriptView {
        session_id: s.session_id,
        phase: s.phase,
        rounds: s.transcript.clone(),
        safe_mode_reason: s.safe_mode_reason.clone(),
    }))
}

async fn vas(
    State(app): State<Arc<AppState>>,
    Path(id): Path<Uuid>,
    body: Result<Json<VasRequest>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let Json(req) = body?;
    if !(0.0..=10.0).contains(&req.value) {
        return Err(ApiError::BadRequest(format!("vas value {} outside 0..=10", req.value)));
    }
    if let Some(d) = req.day {
        if !(1..=14).contains(&d) {
            return Err(ApiError::BadRequest(format!("day {d} outside 1..=14")));
        }
    }
    app.slot(id)?;
    let worker = app.clone();
    let day = tokio::task::spawn_blocking(move || worker.store.append_vas(&id.to_string(), req.day, req.value))
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))??;
    Ok(Json(serde_json::json!({ "session_id": id, "day": day, "vas": req.value })))
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(view))
        .route("/sessions/{id}/turn", post(turn))
        .route("/sessions/{id}/minigame/event", post(minigame_event))
        .route("/sessions/{id}/exit", post(exit))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/sessions/{id}/vas", post(vas))
        .with_state(app)
}
