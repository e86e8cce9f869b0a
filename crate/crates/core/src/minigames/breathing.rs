//! 4-7-8 breathing: hold the key for the inhale (4 s) and breath hold (7 s),
//! release, then exhale (8 s). Each phase tolerates ±`tolerance` seconds.
//!
//! A timing violation silently resets to idle. Only press and release are
//! observable, so the inhale/hold boundary is derived from elapsed time.

use serde::{Deserialize, Serialize};

use super::{GameContext, GameKind, MiniGame, MiniGameError, MiniGameEvent, MiniGameResult, MiniGameState, Progress};

/// Performance points per valid cycle.
pub const POINTS_PER_CYCLE: f64 = 2.0;
pub const DEFAULT_TARGET_CYCLES: u32 = 3;

/// Slack on window edges so decimal timestamps (38.8 − 30.8) do not miss them.
const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreathingTiming {
    pub inhale: f64,
    pub hold: f64,
    pub exhale: f64,
    pub tolerance: f64,
}

impl Default for BreathingTiming {
    fn default() -> Self {
        BreathingTiming {
            inhale: 4.0,
            hold: 7.0,
            exhale: 8.0,
            tolerance: 1.0,
        }
    }
}

impl BreathingTiming {
    fn min_press(&self) -> f64 {
        self.inhale + self.hold - self.tolerance
    }

    fn max_press(&self) -> f64 {
        self.inhale + self.hold + self.tolerance
    }

    fn min_exhale(&self) -> f64 {
        self.exhale - self.tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreathPhase {
    Idle,
    Inhale,
    Hold,
    Exhale,
    CycleDone,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BreathingEvent {
    Press(f64),
    Release(f64),
    Tick(f64),
}

impl BreathingEvent {
    pub fn at(self) -> f64 {
        match self {
            BreathingEvent::Press(t) | BreathingEvent::Release(t) | BreathingEvent::Tick(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreathingState {
    pub phase: BreathPhase,
    pub phase_started_at: f64,
    pub completed_cycles: u32,
    pub target_cycles: u32,
    pub timing: BreathingTiming,
    pressed_at: Option<f64>,
    released_at: Option<f64>,
    last_event_at: Option<f64>,
    /// Number of phase violations so far (informational only).
    pub resets: u32,
}

impl Default for BreathingState {
    fn default() -> Self {
        Self::new(DEFAULT_TARGET_CYCLES, BreathingTiming::default())
    }
}

impl BreathingState {
    pub fn new(target_cycles: u32, timing: BreathingTiming) -> Self {
        BreathingState {
            phase: BreathPhase::Idle,
            phase_started_at: 0.0,
            completed_cycles: 0,
            target_cycles,
            timing,
            pressed_at: None,
            released_at: None,
            last_event_at: None,
            resets: 0,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.completed_cycles >= self.target_cycles
    }

    pub fn performance_points(&self) -> f64 {
        f64::from(self.completed_cycles.min(self.target_cycles)) * POINTS_PER_CYCLE
    }

    /// Applies one timed event and returns the next state.
    pub fn step(&self, event: BreathingEvent) -> Result<BreathingState, MiniGameError> {
        let t = event.at();
        if let Some(last) = self.last_event_at {
            if t < last {
                return Err(MiniGameError::OutOfOrderEvent { last, got: t });
            }
        }
        let mut next = self.clone();
        next.last_event_at = Some(t);
        if self.is_complete() {
            return Ok(next);
        }
        let timing = self.timing;

        match (self.phase, event) {
            (BreathPhase::Idle | BreathPhase::CycleDone, BreathingEvent::Press(t)) => next.begin_inhale(t),
            (BreathPhase::Idle | BreathPhase::CycleDone, _) => {}

            (BreathPhase::Inhale | BreathPhase::Hold, BreathingEvent::Release(t)) => {
                let held = t - next.pressed_at.unwrap_or(t);
                if held >= timing.min_press() - EDGE_EPS && held <= timing.max_press() + EDGE_EPS {
                    next.phase = BreathPhase::Exhale;
                    next.phase_started_at = t;
                    next.released_at = Some(t);
                } else {
                    next.reset();
                }
            }
            // a repeated press (key auto-repeat) behaves like a tick
            (BreathPhase::Inhale | BreathPhase::Hold, BreathingEvent::Tick(t) | BreathingEvent::Press(t)) => {
                let pressed = next.pressed_at.unwrap_or(t);
                let held = t - pressed;
                if held > timing.max_press() + EDGE_EPS {
                    next.reset();
                } else if held >= timing.inhale - EDGE_EPS {
                    if next.phase != BreathPhase::Hold {
                        next.phase = BreathPhase::Hold;
                        next.phase_started_at = pressed + timing.inhale;
                    }
                }
            }

            (BreathPhase::Exhale, BreathingEvent::Tick(t)) => {
                let exhaled = t - next.released_at.unwrap_or(t);
                if exhaled >= timing.exhale - EDGE_EPS {
                    next.finish_cycle(t);
                }
            }
            (BreathPhase::Exhale, BreathingEvent::Press(t)) => {
                let exhaled = t - next.released_at.unwrap_or(t);
                if exhaled >= timing.min_exhale() - EDGE_EPS {
                    next.finish_cycle(t);
                    if !next.is_complete() {
                        next.begin_inhale(t);
                    }
                } else {
                    next.reset();
                }
            }
            (BreathPhase::Exhale, BreathingEvent::Release(_)) => {}
        }
        Ok(next)
    }

    fn begin_inhale(&mut self, t: f64) {
        self.phase = BreathPhase::Inhale;
        self.phase_started_at = t;
        self.pressed_at = Some(t);
        self.released_at = None;
    }

    fn finish_cycle(&mut self, t: f64) {
        self.completed_cycles += 1;
        self.phase = BreathPhase::CycleDone;
        self.phase_started_at = t;
        self.pressed_at = None;
        self.released_at = None;
    }

    fn reset(&mut self) {
        self.phase = BreathPhase::Idle;
        self.pressed_at = None;
        self.released_at = None;
        self.resets += 1;
    }
}

/// Convenience for the free-function form of a breathing transition.
pub fn breathing_step(state: &BreathingState, event: BreathingEvent) -> Result<BreathingState, MiniGameError> {
    state.step(event)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreathingGame {
    pub target_cycles: u32,
    pub timing: BreathingTiming,
}

impl Default for BreathingGame {
    fn default() -> Self {
        BreathingGame {
            target_cycles: DEFAULT_TARGET_CYCLES,
            timing: BreathingTiming::default(),
        }
    }
}

impl MiniGame for BreathingGame {
    fn kind(&self) -> GameKind {
        GameKind::Breathing
    }

    fn start(&self, _seed: u64) -> MiniGameState {
        MiniGameState::Breathing(BreathingState::new(self.target_cycles, self.timing))
    }

    fn handle(
        &self,
        state: &mut MiniGameState,
        event: &MiniGameEvent,
        _ctx: &GameContext<'_>,
    ) -> Result<Progress, MiniGameError> {
        let MiniGameState::Breathing(s) = state else {
            return Err(MiniGameError::GameMismatch {
                active: state.kind(),
                got: GameKind::Breathing,
            });
        };
        let ev = match *event {
            MiniGameEvent::Press { timestamp } => BreathingEvent::Press(timestamp),
            MiniGameEvent::Release { timestamp } => BreathingEvent::Release(timestamp),
            MiniGameEvent::Tick { timestamp } => BreathingEvent::Tick(timestamp),
            MiniGameEvent::Abandon | MiniGameEvent::Finish => {
                return Ok(Progress::Finished(MiniGameResult::abandoned(GameKind::Breathing)))
            }
            ref other => {
                return Err(MiniGameError::UnsupportedEvent {
                    game: GameKind::Breathing,
                    event: other.name().into(),
                })
            }
        };
        *s = s.step(ev)?;
        Ok(if s.is_complete() {
            Progress::Finished(MiniGameResult::completed(GameKind::Breathing, s.performance_points()))
        } else {
            Progress::Continue
        })
    }
}

#[cfg(test)]
mod tests {
    use super::BreathingEvent::*;
    use super::*;

    fn run(events: &[BreathingEvent]) -> BreathingState {
        events
            .iter()
            .fold(BreathingState::default(), |s, &e| s.step(e).unwrap())
    }

    #[test]
    fn one_textbook_cycle() {
        let s = run(&[Press(0.0), Release(11.0), Press(19.0)]);
        assert_eq!(s.completed_cycles, 1);
        assert_eq!(s.phase, BreathPhase::Inhale);
    }

    #[test]
    fn early_release_resets() {
        let s = run(&[Press(0.0), Release(5.0)]);
        assert_eq!(s.completed_cycles, 0);
        assert_eq!(s.phase, BreathPhase::Idle);
        assert_eq!(s.resets, 1);
    }

    #[test]
    fn phases_follow_ticks() {
        let s = run(&[Press(0.0), Tick(2.0)]);
        assert_eq!(s.phase, BreathPhase::Inhale);
        let s = s.step(Tick(4.5)).unwrap();
        assert_eq!((s.phase, s.phase_started_at), (BreathPhase::Hold, 4.0));
        let s = s.step(Tick(12.5)).unwrap();
        assert_eq!(s.phase, BreathPhase::Idle, "held past 12 s");
    }

    #[test]
    fn exhale_completed_by_tick() {
        let s = run(&[Press(0.0), Release(11.0), Tick(18.5)]);
        assert_eq!((s.phase, s.completed_cycles), (BreathPhase::Exhale, 0));
        let s = s.step(Tick(19.0)).unwrap();
        assert_eq!((s.phase, s.completed_cycles), (BreathPhase::CycleDone, 1));
    }

    #[test]
    fn short_exhale_resets() {
        let s = run(&[Press(0.0), Release(11.0), Press(17.5)]);
        assert_eq!((s.phase, s.completed_cycles), (BreathPhase::Idle, 0));
    }

    #[test]
    fn three_cycles_complete_with_six_points() {
        let s = run(&[
            Press(0.0),
            Release(11.0),
            Press(19.0),
            Release(30.0),
            Press(38.0),
            Release(49.0),
            Tick(57.0),
        ]);
        assert!(s.is_complete());
        assert_eq!(s.performance_points(), 6.0);
        // further events are ignored once complete
        assert_eq!(s.step(Press(60.0)).unwrap().completed_cycles, 3);
    }

    #[test]
    fn out_of_order_rejected() {
        let s = run(&[Press(5.0)]);
        assert!(matches!(s.step(Tick(4.0)), Err(MiniGameError::OutOfOrderEvent { .. })));
    }
}
