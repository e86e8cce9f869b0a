//! Game session state machine.
//!
//! Every command (`enter_scene`, `submit_player_input`, ...) validates its
//! input, decides a list of [`EventPayload`]s and then applies them through
//! [`SessionEngine::apply_event`], which is the only code path that mutates a
//! [`SessionState`]. Replaying a recorded event list therefore walks exactly
//! the same transitions as the live session.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::events::EventPayload;
use crate::minigames::{
    GameContext, GameKind, GroundingEvaluator, MiniGameError, MiniGameEvent, MiniGameRegistry, MiniGameResult,
    MiniGameState, OfflineGroundingEvaluator, Progress,
};
use crate::safety::RiskLexicon;
use crate::score::ReconciledTurn;

pub const DEFAULT_PASS_THRESHOLD: f64 = 100.0;
/// Complete dialogue rounds that must separate two mini-game invocations.
pub const DEFAULT_COOLDOWN_ROUNDS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerProfile {
    pub age: u32,
    pub gender: String,
    /// e.g. "student"
    pub identity: String,
    /// Free text describing recent stressful events.
    pub stressor_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    pub description: String,
    pub image_ref: String,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SessionError> {
        if self.name.trim().is_empty() {
            return Err(SessionError::InvalidScene("scene name is empty".into()));
        }
        if self.description.trim().is_empty() {
            return Err(SessionError::InvalidScene("scene description is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Preparation,
    SceneInit,
    Dialogue,
    MiniGameActive,
    Completed,
    SafeModeTerminated,
    Exited,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Completed | Phase::SafeModeTerminated | Phase::Exited)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub pass_threshold: f64,
    /// Complete rounds required between two mini-game invocations; an
    /// invocation is allowed once `round_index − last ≥ cooldown_rounds + 1`.
    pub cooldown_rounds: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            pass_threshold: DEFAULT_PASS_THRESHOLD,
            cooldown_rounds: DEFAULT_COOLDOWN_ROUNDS,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if !(self.pass_threshold.is_finite() && self.pass_threshold > 0.0) {
            return Err(SessionError::InvalidConfig(format!(
                "pass_threshold must be positive, got {}",
                self.pass_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SafeModeReason {
    /// The provider closed the safety gate.
    ProviderGate,
    /// The local lexicon matched the player's dialogue input.
    RiskScreen { phrase: String },
    /// The local lexicon matched a grounding answer.
    GroundingScreen { phrase: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueRound {
    pub round_index: u32,
    pub npc_prompt: String,
    pub player_input: String,
    pub turn: ReconciledTurn,
    pub score_awarded: f64,
    pub minigame_bonus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: Uuid,
    pub phase: Phase,
    pub profile: PlayerProfile,
    pub scene: Option<SceneSpec>,
    /// Count of completed dialogue rounds.
    pub round_index: u32,
    pub cumulative_score: f64,
    pub pass_threshold: f64,
    pub cooldown_rounds: u32,
    pub last_minigame_round: Option<u32>,
    pub active_minigame: Option<MiniGameState>,
    pub transcript: Vec<DialogueRound>,
    pub rng_seed: u64,
    /// The NPC line the player is currently answering.
    pub pending_npc_prompt: Option<String>,
    /// Player text recorded ahead of the NPC turn that answers it.
    pub pending_player_input: Option<String>,
    /// Round indices at which mini-games were started.
    pub minigame_rounds: Vec<u32>,
    pub suppressed_minigame_calls: u32,
    pub safe_mode_reason: Option<SafeModeReason>,
}

impl SessionState {
    /// `min(1, cumulative / threshold)`; cloud opacity is `1 − progress`.
    pub fn progress_fraction(&self) -> f64 {
        (self.cumulative_score / self.pass_threshold).clamp(0.0, 1.0)
    }

    pub fn cloud_opacity(&self) -> f64 {
        1.0 - self.progress_fraction()
    }

    pub fn can_invoke_minigame(&self) -> bool {
        self.can_invoke_at(self.round_index)
    }

    fn can_invoke_at(&self, round: u32) -> bool {
        match self.last_minigame_round {
            None => true,
            Some(last) => round.saturating_sub(last) > self.cooldown_rounds,
        }
    }

    pub fn latest_round(&self) -> Option<&DialogueRound> {
        self.transcript.last()
    }

    pub fn is_safe_mode(&self) -> bool {
        self.phase == Phase::SafeModeTerminated
    }

    /// Σ score_awarded + Σ minigame_bonus over the transcript.
    pub fn ledger_total(&self) -> f64 {
        self.transcript.iter().map(|r| r.score_awarded + r.minigame_bonus).sum()
    }
}

/// Free-function form of [`SessionState::progress_fraction`].
pub fn progress_fraction(state: &SessionState) -> f64 {
    state.progress_fraction()
}

/// Free-function form of [`SessionState::can_invoke_minigame`].
pub fn can_invoke_minigame(state: &SessionState) -> bool {
    state.can_invoke_minigame()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid engine config: {0}")]
    InvalidConfig(String),
    #[error("operation `{op}` not allowed in phase {phase:?}")]
    WrongPhase { op: &'static str, phase: Phase },
    #[error("player input is empty")]
    EmptyInput,
    #[error("result for {got} does not match active game {active}")]
    GameMismatch { active: GameKind, got: GameKind },
    #[error(transparent)]
    MiniGame(#[from] MiniGameError),
    #[error("event log is inconsistent: {0}")]
    Replay(String),
}

/// What a dialogue turn did to the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnOutcome {
    pub round_index: u32,
    pub score_awarded: f64,
    pub cumulative_score: f64,
    pub phase: Phase,
    pub minigame_started: Option<GameKind>,
    pub minigame_suppressed: Option<GameKind>,
    pub safe_mode: Option<SafeModeReason>,
}

/// What a mini-game interaction did to the session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiniGameOutcome {
    pub phase: Phase,
    pub result: Option<MiniGameResult>,
    pub bonus: f64,
    pub safe_mode: Option<SafeModeReason>,
}

/// Stateless rule set shared by all sessions. Holds the risk lexicon, the
/// mini-game registry and the grounding evaluator.
pub struct SessionEngine {
    lexicon: RiskLexicon,
    games: MiniGameRegistry,
    grounding: Box<dyn GroundingEvaluator>,
}

impl Default for SessionEngine {
    fn default() -> Self {
        Self::new(RiskLexicon::default())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Session id derived from the seed, so equal seeds give equal sessions.
pub fn session_id_for_seed(seed: u64) -> Uuid {
    let mut bytes = [0u8; 16];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut bytes);
    uuid::Builder::from_random_bytes(bytes).into_uuid()
}

fn opening_prompt(scene: &SceneSpec) -> String {
    format!(
        "Welcome to {}. {} Take a slow breath and picture yourself here. \
         When you are ready, tell me a little about what has been weighing on you lately.",
        scene.name.trim(),
        scene.description.trim()
    )
}

impl SessionEngine {
    pub fn new(lexicon: RiskLexicon) -> Self {
        SessionEngine {
            lexicon,
            games: MiniGameRegistry::builtin(),
            grounding: Box::new(OfflineGroundingEvaluator),
        }
    }

    pub fn with_games(mut self, games: MiniGameRegistry) -> Self {
        self.games = games;
        self
    }

    pub fn with_grounding(mut self, evaluator: Box<dyn GroundingEvaluator>) -> Self {
        self.grounding = evaluator;
        self
    }

    pub fn lexicon(&self) -> &RiskLexicon {
        &self.lexicon
    }

    pub fn games(&self) -> &MiniGameRegistry {
        &self.games
    }

    fn ctx(&self) -> GameContext<'_> {
        GameContext {
            lexicon: &self.lexicon,
            grounding: self.grounding.as_ref(),
        }
    }

    /// Starts a session in the preparation phase.
    pub fn create_session(
        &self,
        profile: PlayerProfile,
        config: EngineConfig,
        seed: u64,
    ) -> Result<(SessionState, Vec<EventPayload>), SessionError> {
        if profile.stressor_text.trim().is_empty() {
            return Err(SessionError::InvalidProfile("stressor_text is empty".into()));
        }
        config.validate()?;
        let event = EventPayload::Created { profile, config, seed };
        let state = Self::genesis(&event).expect("created event");
        Ok((state, vec![event]))
    }

    fn genesis(event: &EventPayload) -> Option<SessionState> {
        let EventPayload::Created { profile, config, seed } = event else {
            return None;
        };
        Some(SessionState {
            session_id: session_id_for_seed(*seed),
            phase: Phase::Preparation,
            profile: profile.clone(),
            scene: None,
            round_index: 0,
            cumulative_score: 0.0,
            pass_threshold: config.pass_threshold,
            cooldown_rounds: config.cooldown_rounds,
            last_minigame_round: None,
            active_minigame: None,
            transcript: Vec::new(),
            rng_seed: *seed,
            pending_npc_prompt: None,
            pending_player_input: None,
            minigame_rounds: Vec::new(),
            suppressed_minigame_calls: 0,
            safe_mode_reason: None,
        })
    }

    fn require(state: &SessionState, op: &'static str, phases: &[Phase]) -> Result<(), SessionError> {
        if phases.contains(&state.phase) {
            Ok(())
        } else {
            Err(SessionError::WrongPhase { op, phase: state.phase })
        }
    }

    fn commit(&self, state: &mut SessionState, events: Vec<EventPayload>) -> Result<Vec<EventPayload>, SessionError> {
        for e in &events {
            self.apply_event(state, e)?;
        }
        Ok(events)
    }

    /// Stores the scene and queues the NPC's opening prompt.
    pub fn enter_scene(&self, state: &mut SessionState, scene: SceneSpec) -> Result<Vec<EventPayload>, SessionError> {
        Self::require(state, "enter_scene", &[Phase::Preparation])?;
        scene.validate()?;
        let opening_prompt = opening_prompt(&scene);
        self.commit(state, vec![EventPayload::Scene { scene, opening_prompt }])
    }

    /// Applies one dialogue round.
    ///
    /// Order: local risk screen, safety gate, score accumulation, mini-game
    /// scheduling under the cooldown, threshold check.
    pub fn submit_player_input(
        &self,
        state: &mut SessionState,
        text: &str,
        turn: ReconciledTurn,
    ) -> Result<(TurnOutcome, Vec<EventPayload>), SessionError> {
        Self::require(state, "submit_player_input", &[Phase::Dialogue])?;
        if text.trim().is_empty() {
            return Err(SessionError::EmptyInput);
        }
        let screen_hit = self.lexicon.screen(text).map(str::to_string);
        let turn = if screen_hit.is_some() { turn.block() } else { turn };
        let blocked = turn.is_safe_mode();
        let round = state.round_index + 1;

        let requested = GameKind::from_call(turn.turn.mini_game_call);
        let new_total = state.cumulative_score + turn.round_score();
        let completes = !blocked && new_total >= state.pass_threshold;
        let (start, suppressed) = match requested {
            Some(kind) if !blocked && !completes => {
                if state.can_invoke_at(round) && self.games.get(kind).is_some() {
                    (Some(kind), None)
                } else {
                    tracing::info!(session = %state.session_id, round, game = %kind, "mini-game call suppressed");
                    (None, Some(kind))
                }
            }
            _ => (None, None),
        };

        let mut events = vec![
            EventPayload::PlayerInput { text: text.to_string() },
            EventPayload::NpcTurn {
                turn,
                screen_hit: screen_hit.clone(),
                minigame_suppressed: suppressed,
            },
        ];
        let reason = if blocked {
            Some(match screen_hit {
                Some(phrase) => SafeModeReason::RiskScreen { phrase },
                None => SafeModeReason::ProviderGate,
            })
        } else {
            None
        };
        if let Some(reason) = &reason {
            events.push(EventPayload::SafeMode { reason: reason.clone() });
        } else if completes {
            events.push(EventPayload::Completed { cumulative_score: new_total });
        } else if let Some(kind) = start {
            let game = self.games.get(kind).expect("checked above");
            let state_init = game.start(splitmix64(state.rng_seed ^ u64::from(round).wrapping_mul(0xA24B_AED4_963E_E407)));
            events.push(EventPayload::MinigameStart {
                game: kind,
                round_index: round,
                state: state_init,
            });
        }

        let events = self.commit(state, events)?;
        let outcome = TurnOutcome {
            round_index: state.round_index,
            score_awarded: state.latest_round().map_or(0.0, |r| r.score_awarded),
            cumulative_score: state.cumulative_score,
            phase: state.phase,
            minigame_started: start.filter(|_| state.phase == Phase::MiniGameActive),
            minigame_suppressed: suppressed,
            safe_mode: reason,
        };
        Ok((outcome, events))
    }

    /// Routes a player interaction to the active mini-game.
    pub fn handle_minigame_event(
        &self,
        state: &mut SessionState,
        event: MiniGameEvent,
    ) -> Result<(MiniGameOutcome, Vec<EventPayload>), SessionError> {
        Self::require(state, "handle_minigame_event", &[Phase::MiniGameActive])?;
        let mut game_state = state.active_minigame.clone().expect("active phase has a game");
        let game = self
            .games
            .get(game_state.kind())
            .ok_or_else(|| MiniGameError::UnknownGame(game_state.kind().to_string()))?;
        let progress = game.handle(&mut game_state, &event, &self.ctx())?;
        match progress {
            Progress::Continue => {
                let events = self.commit(state, vec![EventPayload::MinigameEvent { event }])?;
                Ok((
                    MiniGameOutcome {
                        phase: state.phase,
                        result: None,
                        bonus: 0.0,
                        safe_mode: None,
                    },
                    events,
                ))
            }
            Progress::Finished(result) => self.apply_minigame_result(state, result),
            Progress::Escalate { phrase } => {
                let reason = SafeModeReason::GroundingScreen { phrase };
                let events = self.commit(state, vec![EventPayload::SafeMode { reason: reason.clone() }])?;
                Ok((
                    MiniGameOutcome {
                        phase: state.phase,
                        result: None,
                        bonus: 0.0,
                        safe_mode: Some(reason),
                    },
                    events,
                ))
            }
        }
    }

    /// Credits a finished mini-game and returns to dialogue (or completes).
    pub fn apply_minigame_result(
        &self,
        state: &mut SessionState,
        result: MiniGameResult,
    ) -> Result<(MiniGameOutcome, Vec<EventPayload>), SessionError> {
        Self::require(state, "apply_minigame_result", &[Phase::MiniGameActive])?;
        let active = state.active_minigame.as_ref().map(MiniGameState::kind).expect("active game");
        if active != result.game {
            return Err(SessionError::GameMismatch {
                active,
                got: result.game,
            });
        }
        let result = if result.is_consistent() {
            result
        } else {
            MiniGameResult::abandoned(result.game)
        };
        let bonus = result.bonus();
        let new_total = state.cumulative_score + bonus;
        let mut events = vec![EventPayload::MinigameResult { result: result.clone() }];
        if new_total >= state.pass_threshold {
            events.push(EventPayload::Completed { cumulative_score: new_total });
        }
        let events = self.commit(state, events)?;
        Ok((
            MiniGameOutcome {
                phase: state.phase,
                result: Some(result),
                bonus,
                safe_mode: None,
            },
            events,
        ))
    }

    /// Ends the session at the player's request.
    pub fn exit_session(&self, state: &mut SessionState) -> Result<Vec<EventPayload>, SessionError> {
        if state.phase.is_terminal() {
            return Err(SessionError::WrongPhase {
                op: "exit_session",
                phase: state.phase,
            });
        }
        self.commit(state, vec![EventPayload::Exited])
    }

    /// The single mutation path. Commands call this after validation; replay
    /// calls it for each recorded event.
    pub fn apply_event(&self, state: &mut SessionState, event: &EventPayload) -> Result<(), SessionError> {
        let bad = |msg: &str| Err(SessionError::Replay(format!("{msg} (phase {:?})", state.phase)));
        match event {
            EventPayload::Created { .. } => return bad("duplicate created event"),
            EventPayload::Scene { scene, opening_prompt } => {
                if state.phase != Phase::Preparation {
                    return bad("scene outside preparation");
                }
                // scene_init is transient: the image is resolved before the event is recorded
                state.scene = Some(scene.clone());
                state.pending_npc_prompt = Some(opening_prompt.clone());
                state.phase = Phase::Dialogue;
            }
            EventPayload::PlayerInput { text } => {
                if state.phase != Phase::Dialogue {
                    return bad("player input outside dialogue");
                }
                state.pending_player_input = Some(text.clone());
            }
            EventPayload::NpcTurn {
                turn,
                minigame_suppressed,
                ..
            } => {
                if state.phase != Phase::Dialogue {
                    return bad("npc turn outside dialogue");
                }
                // the preceding player_input event carries the text
                let player_input = state.pending_player_input.take().unwrap_or_default();
                let round = state.round_index + 1;
                let score = turn.round_score();
                state.transcript.push(DialogueRound {
                    round_index: round,
                    npc_prompt: state.pending_npc_prompt.take().unwrap_or_default(),
                    player_input,
                    turn: turn.clone(),
                    score_awarded: score,
                    minigame_bonus: 0.0,
                });
                state.round_index = round;
                state.cumulative_score += score;
                state.pending_npc_prompt = Some(turn.turn.npc_reply.clone());
                if minigame_suppressed.is_some() {
                    state.suppressed_minigame_calls += 1;
                }
            }
            EventPayload::MinigameStart {
                round_index,
                state: game_state,
                ..
            } => {
                if state.phase != Phase::Dialogue || state.active_minigame.is_some() {
                    return bad("mini-game start outside dialogue");
                }
                state.phase = Phase::MiniGameActive;
                state.active_minigame = Some(game_state.clone());
                state.last_minigame_round = Some(*round_index);
                state.minigame_rounds.push(*round_index);
            }
            EventPayload::MinigameEvent { event } => {
                let Some(game_state) = state.active_minigame.as_mut() else {
                    return bad("mini-game event without active game");
                };
                let game = self
                    .games
                    .get(game_state.kind())
                    .ok_or_else(|| SessionError::Replay(format!("no rules for {}", game_state.kind())))?;
                let offline = OfflineGroundingEvaluator;
                let ctx = GameContext {
                    lexicon: &self.lexicon,
                    grounding: &offline,
                };
                game.handle(game_state, event, &ctx)?;
            }
            EventPayload::MinigameResult { result } => {
                if state.phase != Phase::MiniGameActive {
                    return bad("mini-game result without active game");
                }
                let bonus = result.bonus();
                state.cumulative_score += bonus;
                if let Some(last) = state.transcript.last_mut() {
                    last.minigame_bonus += bonus;
                }
                state.last_minigame_round = Some(state.round_index);
                state.active_minigame = None;
                state.phase = Phase::Dialogue;
            }
            EventPayload::SafeMode { reason } => {
                if state.phase.is_terminal() {
                    return bad("safe mode after termination");
                }
                state.phase = Phase::SafeModeTerminated;
                state.active_minigame = None;
                state.safe_mode_reason = Some(reason.clone());
            }
            EventPayload::Completed { .. } => {
                if state.phase.is_terminal() || state.cumulative_score < state.pass_threshold {
                    return bad("completion below threshold");
                }
                state.phase = Phase::Completed;
            }
            EventPayload::Exited => {
                if state.phase.is_terminal() {
                    return bad("exit after termination");
                }
                state.phase = Phase::Exited;
                state.active_minigame = None;
            }
        }
        Ok(())
    }

    /// Rebuilds a session from its recorded events.
    pub fn replay<'a, I>(&self, events: I) -> Result<SessionState, SessionError>
    where
        I: IntoIterator<Item = &'a EventPayload>,
    {
        let mut iter = events.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| SessionError::Replay("empty event log".into()))?;
        let mut state =
            Self::genesis(first).ok_or_else(|| SessionError::Replay("log must start with a created event".into()))?;
        for e in iter {
            self.apply_event(&mut state, e)?;
        }
        Ok(state)
    }
}

