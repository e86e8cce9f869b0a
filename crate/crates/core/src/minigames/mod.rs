//! Built-in micro-intervention mini-games.
//!
//! Each game is a [`MiniGame`] strategy registered by name in a
//! [`MiniGameRegistry`]. Game state itself is plain data ([`MiniGameState`]) so
//! a session can be cloned, compared and replayed.

pub mod breathing;
pub mod grounding;
pub mod match3;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use breathing::{BreathPhase, BreathingEvent, BreathingGame, BreathingState, BreathingTiming};
pub use grounding::{
    grounding_evaluate, GroundingEvaluator, GroundingForm, GroundingGame, GroundingOutcome,
    GroundingState, OfflineGroundingEvaluator,
};
pub use match3::{Cell, Match3Board, Match3Game, Match3State};

use crate::contract::MiniGameCall;
use crate::safety::RiskLexicon;

/// Points added on top of performance points for finishing any mini-game.
pub const COMPLETION_BONUS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    Breathing,
    Match3,
    FiveSenses,
}

impl GameKind {
    pub const ALL: [GameKind; 3] = [GameKind::Breathing, GameKind::Match3, GameKind::FiveSenses];

    pub fn as_str(self) -> &'static str {
        match self {
            GameKind::Breathing => "breathing",
            GameKind::Match3 => "match3",
            GameKind::FiveSenses => "five_senses",
        }
    }

    pub fn from_call(call: MiniGameCall) -> Option<Self> {
        match call {
            MiniGameCall::None => None,
            MiniGameCall::Breathing => Some(GameKind::Breathing),
            MiniGameCall::Match3 => Some(GameKind::Match3),
            MiniGameCall::FiveSenses => Some(GameKind::FiveSenses),
        }
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MiniGameError {
    #[error("event at t={got} precedes the previous event at t={last}")]
    OutOfOrderEvent { last: f64, got: f64 },
    #[error("board needs width×height ≥ 9 and at least 3 tile kinds (got {width}×{height}, {kinds} kinds)")]
    BadDimensions { width: usize, height: usize, kinds: u8 },
    #[error("grounding form incomplete: {0}")]
    IncompleteForm(String),
    #[error("event `{event}` is not understood by the {game} game")]
    UnsupportedEvent { game: GameKind, event: String },
    #[error("event for {got} sent while {active} is active")]
    GameMismatch { active: GameKind, got: GameKind },
    #[error("no mini-game registered under `{0}`")]
    UnknownGame(String),
    #[error("grounding evaluator failed: {0}")]
    Evaluator(String),
}

/// Outcome of one finished (or abandoned) mini-game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiniGameResult {
    pub game: GameKind,
    pub completed: bool,
    pub performance_points: f64,
}

impl MiniGameResult {
    pub fn completed(game: GameKind, performance_points: f64) -> Self {
        MiniGameResult {
            game,
            completed: true,
            performance_points: performance_points.max(0.0),
        }
    }

    pub fn abandoned(game: GameKind) -> Self {
        MiniGameResult {
            game,
            completed: false,
            performance_points: 0.0,
        }
    }

    /// True when `completed == false ⇒ performance_points == 0` and points are non-negative.
    pub fn is_consistent(&self) -> bool {
        self.performance_points >= 0.0 && (self.completed || self.performance_points == 0.0)
    }

    /// Completion bonus plus performance points; zero when abandoned.
    pub fn bonus(&self) -> f64 {
        if self.completed {
            COMPLETION_BONUS + self.performance_points
        } else {
            0.0
        }
    }
}

/// Per-game state held by a session while a mini-game is active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "snake_case")]
pub enum MiniGameState {
    Breathing(BreathingState),
    Match3(Match3State),
    FiveSenses(GroundingState),
}

impl MiniGameState {
    pub fn kind(&self) -> GameKind {
        match self {
            MiniGameState::Breathing(_) => GameKind::Breathing,
            MiniGameState::Match3(_) => GameKind::Match3,
            MiniGameState::FiveSenses(_) => GameKind::FiveSenses,
        }
    }
}

/// A player interaction routed to the active game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event_kind", rename_all = "snake_case")]
pub enum MiniGameEvent {
    Press { timestamp: f64 },
    Release { timestamp: f64 },
    Tick { timestamp: f64 },
    Chain { path: Vec<Cell> },
    Submit { form: GroundingForm },
    /// Ends the game early; scored as completed only where the game allows it.
    Finish,
    Abandon,
}

impl MiniGameEvent {
    pub fn name(&self) -> &'static str {
        match self {
            MiniGameEvent::Press { .. } => "press",
            MiniGameEvent::Release { .. } => "release",
            MiniGameEvent::Tick { .. } => "tick",
            MiniGameEvent::Chain { .. } => "chain",
            MiniGameEvent::Submit { .. } => "submit",
            MiniGameEvent::Finish => "finish",
            MiniGameEvent::Abandon => "abandon",
        }
    }
}

/// Result of feeding one event to a game.
#[derive(Debug, Clone, PartialEq)]
pub enum Progress {
    Continue,
    Finished(MiniGameResult),
    /// A grounding answer matched the risk lexicon; the session must enter safe mode.
    Escalate { phrase: String },
}

/// Services a game may need while handling an event.
pub struct GameContext<'a> {
    pub lexicon: &'a RiskLexicon,
    pub grounding: &'a dyn GroundingEvaluator,
}

/// One interchangeable mini-game rule set.
pub trait MiniGame: Send + Sync {
    fn kind(&self) -> GameKind;

    /// Fresh game state; all randomness derives from `seed`.
    fn start(&self, seed: u64) -> MiniGameState;

    fn handle(
        &self,
        state: &mut MiniGameState,
        event: &MiniGameEvent,
        ctx: &GameContext<'_>,
    ) -> Result<Progress, MiniGameError>;
}

/// Name → game lookup used by the session engine.
pub struct MiniGameRegistry {
    games: BTreeMap<GameKind, Box<dyn MiniGame>>,
}

impl Default for MiniGameRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl MiniGameRegistry {
    pub fn empty() -> Self {
        MiniGameRegistry {
            games: BTreeMap::new(),
        }
    }

    /// Breathing, match-3 and five-senses grounding with default settings.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(BreathingGame::default()));
        r.register(Box::new(Match3Game::default()));
        r.register(Box::new(GroundingGame));
        r
    }

    /// Registers `game`, replacing any game of the same kind.
    pub fn register(&mut self, game: Box<dyn MiniGame>) {
        self.games.insert(game.kind(), game);
    }

    pub fn get(&self, kind: GameKind) -> Option<&dyn MiniGame> {
        self.games.get(&kind).map(|g| g.as_ref())
    }

    pub fn by_name(&self, name: &str) -> Result<&dyn MiniGame, MiniGameError> {
        GameKind::ALL
            .into_iter()
            .find(|k| k.as_str() == name)
            .and_then(|k| self.get(k))
            .ok_or_else(|| MiniGameError::UnknownGame(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.games.keys().map(|k| k.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn award_table() {
        assert_eq!(MiniGameResult::completed(GameKind::Breathing, 6.0).bonus(), 11.0);
        assert_eq!(MiniGameResult::abandoned(GameKind::Match3).bonus(), 0.0);
        assert!(MiniGameResult::abandoned(GameKind::Match3).is_consistent());
    }

    #[test]
    fn registry_lookup() {
        let r = MiniGameRegistry::builtin();
        assert_eq!(r.names().collect::<Vec<_>>(), ["breathing", "match3", "five_senses"]);
        assert_eq!(r.by_name("match3").unwrap().kind(), GameKind::Match3);
        assert!(matches!(r.by_name("tetris"), Err(MiniGameError::UnknownGame(_))));
    }

    #[test]
    fn event_wire_format() {
        let ev: MiniGameEvent =
            serde_json::from_str(r#"{"event_kind":"press","timestamp":1.5}"#).unwrap();
        assert_eq!(ev, MiniGameEvent::Press { timestamp: 1.5 });
        let ev: MiniGameEvent =
            serde_json::from_str(r#"{"event_kind":"chain","path":[[0,0],[0,1],[0,2]]}"#).unwrap();
        assert_eq!(ev, MiniGameEvent::Chain { path: vec![Cell(0, 0), Cell(0, 1), Cell(0, 2)] });
    }
}
