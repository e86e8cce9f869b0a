#![allow(dead_code)]

use reverie_core::{
    reconcile_turn, Difficulty, EngineConfig, MiniGameCall, NpcTurn, PlayerProfile, ReconciledTurn, RubricLevel,
    SafetyGate, SceneSpec, SessionEngine, SessionState,
};

pub fn profile() -> PlayerProfile {
    PlayerProfile {
        age: 20,
        gender: "female".into(),
        identity: "student".into(),
        stressor_text: "Finals are next week and I keep procrastinating.".into(),
    }
}

pub fn scene() -> SceneSpec {
    SceneSpec {
        name: "Lantern Lake".into(),
        description: "A still lake at dusk with drifting paper lanterns.".into(),
        image_ref: "placeholder:00".into(),
    }
}

/// Open-gate turn with F=1, normal difficulty and the given rubric levels.
pub fn turn(c: u8, e: u8, p: u8, call: MiniGameCall) -> ReconciledTurn {
    reconcile_turn(NpcTurn {
        npc_reply: "I hear you. What feels heaviest right now?".into(),
        safety_gate: SafetyGate::Open,
        difficulty_factor: Difficulty::Normal,
        penalty_score: 1,
        ct: RubricLevel::new(c).unwrap(),
        et: RubricLevel::new(e).unwrap(),
        pt: RubricLevel::new(p).unwrap(),
        round_score: 0.0,
        mini_game_call: call,
        safe_mode: false,
        suggested_replies: vec![],
    })
}

/// Turn worth exactly `points` (1..=10) at normal difficulty.
pub fn scoring(points: u8) -> ReconciledTurn {
    let rest = points - 1;
    let c = rest.min(5);
    let e = (rest - c).min(5);
    turn(c, e, rest - c - e, MiniGameCall::None)
}

pub fn blocked() -> ReconciledTurn {
    reconcile_turn(NpcTurn {
        safety_gate: SafetyGate::Blocked,
        safe_mode: true,
        ..turn(3, 3, 3, MiniGameCall::None).turn
    })
}

pub fn in_dialogue(engine: &SessionEngine, config: EngineConfig, seed: u64) -> (SessionState, Vec<reverie_core::EventPayload>) {
    let (mut s, mut log) = engine.create_session(profile(), config, seed).unwrap();
    log.extend(engine.enter_scene(&mut s, scene()).unwrap());
    (s, log)
}
