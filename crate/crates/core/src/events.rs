//! Session event records and their JSON Lines framing.
//!
//! One record per line:
//! `{"ts": ISO-8601, "session_id": ..., "kind": ..., "payload": {...}}`.
//! `minigame_event` records individual non-terminal mini-game interactions so
//! that replay also restores an in-progress game.

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::minigames::{GameKind, MiniGameEvent, MiniGameResult, MiniGameState};
use crate::score::ReconciledTurn;
use crate::session::{EngineConfig, PlayerProfile, SafeModeReason, SceneSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventPayload {
    Created {
        profile: PlayerProfile,
        config: EngineConfig,
        seed: u64,
    },
    Scene {
        scene: SceneSpec,
        opening_prompt: String,
    },
    PlayerInput {
        text: String,
    },
    NpcTurn {
        turn: ReconciledTurn,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        screen_hit: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        minigame_suppressed: Option<GameKind>,
    },
    MinigameStart {
        game: GameKind,
        round_index: u32,
        state: MiniGameState,
    },
    MinigameEvent {
        event: MiniGameEvent,
    },
    MinigameResult {
        result: MiniGameResult,
    },
    SafeMode {
        reason: SafeModeReason,
    },
    Completed {
        cumulative_score: f64,
    },
    Exited,
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::Created { .. } => "created",
            EventPayload::Scene { .. } => "scene",
            EventPayload::PlayerInput { .. } => "player_input",
            EventPayload::NpcTurn { .. } => "npc_turn",
            EventPayload::MinigameStart { .. } => "minigame_start",
            EventPayload::MinigameEvent { .. } => "minigame_event",
            EventPayload::MinigameResult { .. } => "minigame_result",
            EventPayload::SafeMode { .. } => "safe_mode",
            EventPayload::Completed { .. } => "completed",
            EventPayload::Exited => "exited",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub ts: String,
    pub session_id: Uuid,
    #[serde(flatten)]
    pub payload: EventPayload,
}

impl EventRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event records always serialize")
    }
}

/// Result of decoding a JSONL log.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLog {
    pub records: Vec<EventRecord>,
    /// Set when decoding stopped early; the reason is human readable.
    pub warning: Option<String>,
}

/// Decodes complete lines; a torn or corrupt line ends decoding with a warning
/// and everything before it is kept.
pub fn decode_log(text: &str) -> DecodedLog {
    let mut records = Vec::new();
    let mut warning = None;
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.split('\n').collect();
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if i == last && !complete {
            warning = Some(format!("line {} is truncated; replay stops at the last complete event", i + 1));
            break;
        }
        match serde_json::from_str::<EventRecord>(line) {
            Ok(r) => records.push(r),
            Err(e) => {
                warning = Some(format!("line {} is unreadable ({e}); replay stops at the last complete event", i + 1));
                break;
            }
        }
    }
    DecodedLog { records, warning }
}
