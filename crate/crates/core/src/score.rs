//! Round score feedback model.
//!
//! ```text
//! evaluation = 1 + penalty × (restructuring + engagement + progress)
//! score      = gate × difficulty × min(evaluation, 10)
//! ```
//!
//! The locally computed score is authoritative; the value reported by the
//! model is kept only for auditing.

use serde::{Deserialize, Serialize};

use crate::contract::{Difficulty, MiniGameCall, NpcTurn, RubricLevel, SafetyGate};

/// Base score awarded for every non-blocked round.
pub const BASE_SCORE: f64 = 1.0;
/// Cap applied to the evaluation before the difficulty multiplier.
pub const EVALUATION_CAP: f64 = 10.0;
/// Reported and recomputed scores further apart than this are corrected.
pub const SCORE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreComponents {
    pub safety_gate: SafetyGate,
    pub difficulty_factor: Difficulty,
    /// 0 for off-topic or perfunctory responses, 1 otherwise.
    pub penalty_score: u8,
    pub ct: RubricLevel,
    pub et: RubricLevel,
    pub pt: RubricLevel,
}

impl ScoreComponents {
    /// Every in-domain component combination (2 × 3 × 2 × 6³ = 2,592).
    pub fn grid() -> impl Iterator<Item = ScoreComponents> {
        let gates = [SafetyGate::Blocked, SafetyGate::Open];
        gates.into_iter().flat_map(|safety_gate| {
            Difficulty::ALL.into_iter().flat_map(move |difficulty_factor| {
                (0..=1u8).flat_map(move |penalty_score| {
                    RubricLevel::all().flat_map(move |ct| {
                        RubricLevel::all().flat_map(move |et| {
                            RubricLevel::all().map(move |pt| ScoreComponents {
                                safety_gate,
                                difficulty_factor,
                                penalty_score,
                                ct,
                                et,
                                pt,
                            })
                        })
                    })
                })
            })
        })
    }
}

impl From<&NpcTurn> for ScoreComponents {
    fn from(t: &NpcTurn) -> Self {
        ScoreComponents {
            safety_gate: t.safety_gate,
            difficulty_factor: t.difficulty_factor,
            penalty_score: t.penalty_score,
            ct: t.ct,
            et: t.et,
            pt: t.pt,
        }
    }
}

/// `1 + F × (C + E + P)`, in `[1, 16]`.
pub fn evaluation_score(c: &ScoreComponents) -> f64 {
    let sum = u32::from(c.ct.get()) + u32::from(c.et.get()) + u32::from(c.pt.get());
    BASE_SCORE + f64::from(u32::from(c.penalty_score) * sum)
}

/// `gate × difficulty × min(evaluation, 10)`, in `{0} ∪ [0.8, 12]`.
pub fn compute_round_score(c: &ScoreComponents) -> f64 {
    if !c.safety_gate.is_open() {
        return 0.0;
    }
    c.difficulty_factor.factor() * evaluation_score(c).min(EVALUATION_CAP)
}

/// A parsed turn whose score and safety fields have been made consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciledTurn {
    /// The turn with `round_score`, `safe_mode`, `safety_gate` and
    /// `mini_game_call` replaced by their authoritative values.
    pub turn: NpcTurn,
    /// The score the model reported before correction.
    pub reported_round_score: f64,
    pub score_corrected: bool,
    /// Set when the safety fields disagreed and had to be forced.
    pub safety_corrected: bool,
}

impl ReconciledTurn {
    pub fn round_score(&self) -> f64 {
        self.turn.round_score
    }

    pub fn is_safe_mode(&self) -> bool {
        self.turn.safe_mode
    }

    /// Forces the turn into the blocked state, e.g. after a local risk screen hit.
    pub fn block(mut self) -> Self {
        if self.turn.safety_gate.is_open() || !self.turn.safe_mode {
            self.safety_corrected = true;
        }
        self.turn.safety_gate = SafetyGate::Blocked;
        reconcile_inner(self)
    }
}

/// Recomputes the round score locally and enforces the safety invariants.
///
/// * `safe_mode` is forced to `safety_gate == 0`. A turn that claims safe mode
///   while leaving the gate open is treated as blocked: the safety signal wins.
/// * A blocked turn never calls a mini-game.
/// * The recomputed score replaces the reported one when they differ.
pub fn reconcile_turn(turn: NpcTurn) -> ReconciledTurn {
    let reported = turn.round_score;
    reconcile_inner(ReconciledTurn {
        turn,
        reported_round_score: reported,
        score_corrected: false,
        safety_corrected: false,
    })
}

fn reconcile_inner(mut r: ReconciledTurn) -> ReconciledTurn {
    let t = &mut r.turn;
    if t.safe_mode && t.safety_gate.is_open() {
        t.safety_gate = SafetyGate::Blocked;
        r.safety_corrected = true;
    }
    let blocked = !t.safety_gate.is_open();
    if t.safe_mode != blocked {
        t.safe_mode = blocked;
        r.safety_corrected = true;
    }
    if blocked && t.mini_game_call != MiniGameCall::None {
        t.mini_game_call = MiniGameCall::None;
        r.safety_corrected = true;
    }
    let recomputed = compute_round_score(&ScoreComponents::from(&*t));
    if (r.reported_round_score - recomputed).abs() > SCORE_TOLERANCE {
        r.score_corrected = true;
    }
    t.round_score = recomputed;
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::fixtures::EXAMPLE_TURN;
    use crate::contract::parse_npc_turn;

    fn comps(gate: u8, mult: f64, f: u8, c: u8, e: u8, p: u8) -> ScoreComponents {
        ScoreComponents {
            safety_gate: SafetyGate::try_from(gate).unwrap(),
            difficulty_factor: Difficulty::from_factor(mult).unwrap(),
            penalty_score: f,
            ct: RubricLevel::new(c).unwrap(),
            et: RubricLevel::new(e).unwrap(),
            pt: RubricLevel::new(p).unwrap(),
        }
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(evaluation_score(&comps(1, 1.0, 1, 5, 4, 4)), 14.0);
        for (c, e, p) in [(0, 0, 0), (5, 5, 5), (2, 3, 1)] {
            assert_eq!(evaluation_score(&comps(1, 1.0, 0, c, e, p)), 1.0);
        }
        assert_eq!(evaluation_score(&comps(1, 1.0, 1, 0, 0, 0)), 1.0);
    }

    #[test]
    fn round_score_examples() {
        assert_eq!(compute_round_score(&comps(1, 1.0, 1, 5, 4, 4)), 10.0);
        assert_eq!(compute_round_score(&comps(0, 1.2, 1, 5, 5, 5)), 0.0);
        assert_eq!(compute_round_score(&comps(1, 1.2, 1, 5, 5, 5)), 12.0);
        assert_eq!(compute_round_score(&comps(1, 0.8, 0, 0, 0, 0)), 0.8);
    }

    #[test]
    fn grid_has_expected_size() {
        assert_eq!(ScoreComponents::grid().count(), 2 * 3 * 2 * 6 * 6 * 6);
    }

    #[test]
    fn reconcile_accepts_example() {
        let r = reconcile_turn(parse_npc_turn(EXAMPLE_TURN).unwrap());
        assert!(!r.score_corrected && !r.safety_corrected);
        assert_eq!(r.round_score(), 10.0);
    }

    #[test]
    fn reconcile_corrects_reported_score() {
        let mut t = parse_npc_turn(EXAMPLE_TURN).unwrap();
        t.round_score = 9.0;
        let r = reconcile_turn(t);
        assert!(r.score_corrected);
        assert_eq!(r.reported_round_score, 9.0);
        assert_eq!(r.round_score(), 10.0);
    }

    #[test]
    fn reconcile_blocked_turn() {
        let mut t = parse_npc_turn(EXAMPLE_TURN).unwrap();
        t.safety_gate = SafetyGate::Blocked;
        t.round_score = 3.0;
        t.mini_game_call = MiniGameCall::Breathing;
        let r = reconcile_turn(t);
        assert!(r.score_corrected && r.safety_corrected);
        assert_eq!(r.round_score(), 0.0);
        assert!(r.turn.safe_mode);
        assert_eq!(r.turn.mini_game_call, MiniGameCall::None);
    }

    #[test]
    fn blocked_grid_always_zero_and_safe() {
        // exhaustive: every gate-0 turn reconciles to score 0 with safe mode on
        let base = parse_npc_turn(EXAMPLE_TURN).unwrap();
        for c in ScoreComponents::grid().filter(|c| !c.safety_gate.is_open()) {
            let mut t = base.clone();
            t.safety_gate = c.safety_gate;
            t.difficulty_factor = c.difficulty_factor;
            t.penalty_score = c.penalty_score;
            t.ct = c.ct;
            t.et = c.et;
            t.pt = c.pt;
            t.round_score = 3.0;
            t.safe_mode = false;
            let r = reconcile_turn(t);
            assert_eq!(r.round_score(), 0.0);
            assert!(r.turn.safe_mode && r.score_corrected);
        }
    }

    #[test]
    fn safe_mode_claim_closes_gate() {
        let mut t = parse_npc_turn(EXAMPLE_TURN).unwrap();
        t.safe_mode = true;
        let r = reconcile_turn(t);
        assert_eq!(r.turn.safety_gate, SafetyGate::Blocked);
        assert_eq!(r.round_score(), 0.0);
    }

    #[test]
    fn block_forces_zero() {
        let r = reconcile_turn(parse_npc_turn(EXAMPLE_TURN).unwrap()).block();
        assert!(r.is_safe_mode());
        assert_eq!(r.round_score(), 0.0);
        assert!(r.safety_corrected);
    }
}
