//! Glue between the agents and the session engine: one call per player action.
//!
//! A command either succeeds and returns the events it committed, or fails and
//! leaves the session untouched, so a provider outage never half-applies a round.

use thiserror::Error;

use crate::agent::{build_npc_system_prompt, AgentGateway, GatewayError, NpcReply, ProviderError};
use crate::contract::{Difficulty, MiniGameCall, NpcTurn, RubricLevel, SafetyGate};
use crate::events::EventPayload;
use crate::score::{reconcile_turn, ReconciledTurn};
use crate::session::{EngineConfig, PlayerProfile, SessionEngine, SessionError, SessionState, TurnOutcome};

/// Shown when the local risk screen fires before any model call.
pub const SAFE_MODE_REPLY: &str = "I'm really glad you told me. What you are describing matters more than this game. \
Please reach out now to a local hospital, a mental health service or an emergency line, and consider letting \
someone you trust know how you are feeling.";

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl From<ProviderError> for DriverError {
    fn from(e: ProviderError) -> Self {
        DriverError::Gateway(GatewayError::Provider(e))
    }
}

/// Result of one dialogue round driven through the provider.
#[derive(Debug, Clone)]
pub struct PlayedTurn {
    pub outcome: TurnOutcome,
    pub events: Vec<EventPayload>,
    /// `None` when the local screen blocked the input and no request was sent.
    pub reply: Option<NpcReply>,
}

pub struct GameDriver {
    engine: SessionEngine,
    gateway: AgentGateway,
}

fn blocked_turn() -> ReconciledTurn {
    let zero = RubricLevel::new(0).expect("0 is a rubric level");
    reconcile_turn(NpcTurn {
        npc_reply: SAFE_MODE_REPLY.to_string(),
        safety_gate: SafetyGate::Blocked,
        difficulty_factor: Difficulty::Normal,
        penalty_score: 0,
        ct: zero,
        et: zero,
        pt: zero,
        round_score: 0.0,
        mini_game_call: MiniGameCall::None,
        safe_mode: true,
        suggested_replies: Vec::new(),
    })
}

impl GameDriver {
    pub fn new(engine: SessionEngine, gateway: AgentGateway) -> Self {
        GameDriver { engine, gateway }
    }

    pub fn engine(&self) -> &SessionEngine {
        &self.engine
    }

    pub fn gateway(&self) -> &AgentGateway {
        &self.gateway
    }

    /// Creates the session, asks the scene agent for a scene and enters it.
    pub fn start(
        &self,
        profile: PlayerProfile,
        config: EngineConfig,
        seed: u64,
    ) -> Result<(SessionState, Vec<EventPayload>), DriverError> {
        let (mut state, mut events) = self.engine.create_session(profile, config, seed)?;
        let scene = self.gateway.generate_scene(&state.profile)?;
        events.extend(self.engine.enter_scene(&mut state, scene)?);
        Ok((state, events))
    }

    /// Sends the player's input to the NPC agent and applies the reconciled turn.
    pub fn play_turn(&self, state: &mut SessionState, text: &str) -> Result<PlayedTurn, DriverError> {
        if text.trim().is_empty() {
            return Err(SessionError::EmptyInput.into());
        }
        let scene = match (&state.scene, state.phase) {
            (Some(scene), crate::session::Phase::Dialogue) => scene,
            _ => {
                return Err(SessionError::WrongPhase {
                    op: "submit_player_input",
                    phase: state.phase,
                }
                .into())
            }
        };
        let (turn, reply) = if self.engine.lexicon().screen(text).is_some() {
            (blocked_turn(), None)
        } else {
            let bundle = build_npc_system_prompt(&state.profile, scene, state.round_index)
                .with_history(&state.transcript)
                .with_player_input(text);
            let reply = self.gateway.request_npc_turn(&bundle)?;
            (reconcile_turn(reply.turn.clone()), Some(reply))
        };
        let (outcome, events) = self.engine.submit_player_input(state, text, turn)?;
        Ok(PlayedTurn { outcome, events, reply })
    }
}
