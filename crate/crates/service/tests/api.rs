use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use reverie_core::agent::{AgentGateway, ProviderError, RetryPolicy, ScriptStep, ScriptedProvider};
use reverie_core::{EngineConfig, GameDriver, SessionEngine};
use reverie_service::api::{router, AppState};
use reverie_service::store::EventStore;
use serde_json::{json, Value};
use tower::ServiceExt;

fn turn(call: &str, ct: u8) -> String {
    json!({
        "npc_reply": "What evidence do you have for that thought?",
        "safety_gate": 1,
        "difficulty_factor": 1.0,
        "penalty_score": 1,
        "Ct": ct,
        "Et": 3,
        "Pt": 2,
        "round_score": 1 + ct + 5,
        "mini_game_call": call,
        "safe_mode": false
    })
    .to_string()
}

fn app(script: Vec<ScriptStep>, data: &std::path::Path) -> Router {
    let provider = Arc::new(ScriptedProvider::new(script));
    let driver = GameDriver::new(SessionEngine::default(), AgentGateway::new(provider, RetryPolicy::none()));
    let store = EventStore::open(data).unwrap();
    router(AppState::new(driver, store, EngineConfig::default()).unwrap())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = axum::body::to_bytes(res.into_body(), usize::MAX).await.unwrap();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, v)
}

fn profile() -> Value {
    json!({"age": 20, "gender": "female", "identity": "student", "stressor_text": "exams soon"})
}

async fn create(app: &Router, seed: u64) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(json!({"profile": profile(), "seed": seed}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn create_then_play_a_round() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(vec![ScriptStep::Reply(turn("none", 4))], dir.path());
    assert_eq!(call(&app, "GET", "/healthz", None).await.0, StatusCode::OK);

    let id = create(&app, 11).await;
    let (status, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["phase"], "dialogue");
    assert_eq!(v["cloud_opacity"], 1.0);

    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(json!({"text": "maybe it is not that bad"}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["round_index"], 1);
    assert_eq!(v["cumulative_score"], 10.0);

    let (status, v) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["rounds"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn unknown_session_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(vec![], dir.path());
    let missing = "00000000-0000-4000-8000-000000000000";
    let (status, v) = call(&app, "GET", &format!("/sessions/{missing}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(v["error"].is_string());
    let (status, _) = call(&app, "POST", &format!("/sessions/{missing}/turn"), Some(json!({"text": "hi"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"profile": {"age": "old"}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let id = create(&app, 3).await;
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(json!({"text": "   "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"profile": profile(), "seed": 3}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/vas"), Some(json!({"value": 11.0}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn dialogue_is_refused_while_a_minigame_runs() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(vec![ScriptStep::Reply(turn("match3", 3))], dir.path());
    let id = create(&app, 5).await;
    let (_, v) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(json!({"text": "I could plan tonight"}))).await;
    assert_eq!(v["phase"], "mini_game_active");
    assert_eq!(v["active_minigame"]["game"], "match3");

    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(json!({"text": "hello?"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/minigame/event"), Some(json!({"event_kind": "abandon"}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["phase"], "dialogue");
}

#[tokio::test]
async fn repeated_request_id_is_applied_once() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(vec![ScriptStep::Reply(turn("none", 2)), ScriptStep::Reply(turn("none", 2))], dir.path());
    let id = create(&app, 8).await;
    let body = json!({"text": "I can ask for help", "request_id": "r-1"});
    let (_, first) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(body.clone())).await;
    let (_, again) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(body)).await;
    assert_eq!(first, again);
    assert_eq!(again["round_index"], 1);
}

#[tokio::test]
async fn provider_failure_is_a_sanitized_502() {
    let dir = tempfile::tempdir().unwrap();
    let secret = "sk-test-0123456789";
    let app = app(
        vec![ScriptStep::Fail(ProviderError::Status {
            status: 401,
            body: format!("invalid key {secret}"),
        })],
        dir.path(),
    );
    let id = create(&app, 9).await;
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(json!({"text": "my private worry"}))).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    let text = v.to_string();
    assert!(!text.contains(secret));
    assert!(!text.contains("my private worry"));
    assert!(!text.contains("[PLAYER PROFILE]"));
    // the failed round left no trace
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["round_index"], 0);
}

#[tokio::test]
async fn restart_recovers_sessions_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let app = app(vec![ScriptStep::Reply(turn("none", 5))], dir.path());
        let id = create(&app, 21).await;
        call(&app, "POST", &format!("/sessions/{id}/turn"), Some(json!({"text": "one step at a time"}))).await;
        id
    };
    let app = app(vec![], dir.path());
    let (status, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["round_index"], 1);
    assert_eq!(v["cumulative_score"], 10.0);
}

#[tokio::test]
async fn risk_text_ends_in_safe_mode_without_score() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(vec![], dir.path());
    let id = create(&app, 4).await;
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(json!({"text": "I want to die"}))).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["safe_mode"], true);
    assert_eq!(v["cumulative_score"], 0.0);
    assert!(v["safe_mode_notice"].is_string());
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(json!({"text": "hello"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}
