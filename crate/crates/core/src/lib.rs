//! Core engine for Reverie, a stress-relief dialogue game driven by a
//! language-model NPC.
//!
//! * [`contract`] parses and validates the NPC's structured turn record.
//! * [`score`] computes the authoritative round score.
//! * [`session`] drives a session through preparation, dialogue, mini-games
//!   and termination, event-sourced via [`events`].
//! * [`minigames`] holds the breathing, match-3 and grounding rule engines.
//! * [`agent`] assembles prompts and talks to chat-completion providers.
//! * [`driver`] wires the agents to the engine for one player action at a time.

pub mod agent;
pub mod contract;
pub mod driver;
pub mod events;
pub mod minigames;
pub mod safety;
pub mod score;
pub mod session;

pub use contract::{parse_npc_turn, ContractError, Difficulty, MiniGameCall, NpcTurn, RubricLevel, SafetyGate};
pub use driver::{DriverError, GameDriver, PlayedTurn};
pub use events::{EventPayload, EventRecord};
pub use safety::RiskLexicon;
pub use score::{compute_round_score, evaluation_score, reconcile_turn, ReconciledTurn, ScoreComponents};
pub use session::{
    EngineConfig, Phase, PlayerProfile, SceneSpec, SessionEngine, SessionError, SessionState, TurnOutcome,
};
