//! Batch simulation of persona-driven sessions against the scripted provider.
//!
//! Every session gets its own seed, a persona, and a pre-generated fixture list
//! for the scripted provider. Mini-games are played automatically. After each
//! session its event log is encoded as JSONL, decoded and replayed, and the
//! replayed state must equal the live one bit for bit.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reverie_core::agent::{AgentGateway, RetryPolicy, ScriptStep, ScriptedProvider};
use reverie_core::events::decode_log;
use reverie_core::minigames::{BreathingState, GameKind, GroundingForm, MiniGameEvent, MiniGameState};
use reverie_core::{EngineConfig, EventPayload, EventRecord, GameDriver, Phase, PlayerProfile, SessionEngine};
use serde::{Deserialize, Serialize};

pub const BUNDLED_PERSONAS: &str = include_str!("../data/personas.json");

/// Safety net against a persona that can never reach the threshold.
pub const MAX_ROUNDS: u32 = 80;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafeModeVia {
    /// The player's text matches the risk lexicon.
    Lexicon,
    /// The provider closes the safety gate.
    Gate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeModeFixture {
    pub at_round: u32,
    pub via: SafeModeVia,
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricRanges {
    pub ct: [u8; 2],
    pub et: [u8; 2],
    pub pt: [u8; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    #[serde(default = "one")]
    pub weight: f64,
    pub profile: PlayerProfile,
    pub rubric: RubricRanges,
    /// Share of rounds judged perfunctory (penalty 0).
    #[serde(default)]
    pub perfunctory_rate: f64,
    /// Weights for easy, normal and hard.
    #[serde(default = "normal_only")]
    pub difficulty: [f64; 3],
    #[serde(default)]
    pub minigame_rate: f64,
    /// Share of replies that arrive malformed and need the repair request.
    #[serde(default)]
    pub malformed_rate: f64,
    #[serde(default)]
    pub abandon_rate: f64,
    /// Chance per breathing cycle of letting go too early.
    #[serde(default)]
    pub breathing_slip_rate: f64,
    pub utterances: Vec<String>,
    pub grounding_pool: Vec<String>,
    #[serde(default)]
    pub safe_mode: Option<SafeModeFixture>,
}

fn one() -> f64 {
    1.0
}

fn normal_only() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaFile {
    pub personas: Vec<Persona>,
}

impl PersonaFile {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let f: PersonaFile = serde_json::from_str(text).context("persona file")?;
        if f.personas.is_empty() {
            bail!("persona file lists no personas");
        }
        for p in &f.personas {
            if p.utterances.is_empty() {
                bail!("persona `{}` has no utterances", p.name);
            }
            if p.grounding_pool.len() < 15 {
                bail!("persona `{}` needs at least 15 grounding answers", p.name);
            }
            if !(p.weight > 0.0) {
                bail!("persona `{}` needs a positive weight", p.name);
            }
            for r in [p.rubric.ct, p.rubric.et, p.rubric.pt] {
                if r[0] > r[1] || r[1] > 5 {
                    bail!("persona `{}` has a bad rubric range {r:?}", p.name);
                }
            }
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        Self::parse(&std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_PERSONAS).expect("bundled personas are valid")
    }
}

const REPLIES: [&str; 6] = [
    "Thank you for sharing that. It sounds like a lot to carry right now.",
    "I notice the word 'always' in what you said. Is that thought completely true?",
    "What would you say to a friend who had the same worry?",
    "That is a more balanced way to see it. What is one small step you could take today?",
    "You are noticing your thoughts rather than being swept away by them. That matters.",
    "Let us slow down for a moment and look at the evidence for and against that thought.",
];

const CALLS: [&str; 3] = ["breathing", "match3", "five_senses"];

/// One NPC reply for round `round` in the wire format.
fn npc_reply(p: &Persona, rng: &mut ChaCha8Rng, round: u32, gate_closed: bool) -> String {
    let pick = |rng: &mut ChaCha8Rng, r: [u8; 2]| rng.random_range(r[0]..=r[1]);
    let (c, e) = (pick(rng, p.rubric.ct), pick(rng, p.rubric.et));
    let pt = if round == 1 { 2 } else { pick(rng, p.rubric.pt) };
    let f: u8 = if rng.random_bool(p.perfunctory_rate.clamp(0.0, 1.0)) { 0 } else { 1 };
    let total: f64 = p.difficulty.iter().sum();
    let mut u = rng.random_range(0.0..total);
    let mut diff = 1.0;
    for (w, d) in p.difficulty.iter().zip([0.8, 1.0, 1.2]) {
        if u < *w {
            diff = d;
            break;
        }
        u -= w;
    }
    let call = if !gate_closed && rng.random_bool(p.minigame_rate.clamp(0.0, 1.0)) {
        *CALLS.choose(rng).expect("non-empty")
    } else {
        "none"
    };
    let gate: u8 = if gate_closed { 0 } else { 1 };
    let eval = (1.0 + f64::from(f) * f64::from(c + e + pt)).min(10.0);
    let score = f64::from(gate) * diff * eval;
    let reply = if gate_closed {
        "I'm concerned about your safety. Please reach out to a local hospital or mental health service now."
    } else {
        REPLIES.choose(rng).expect("non-empty")
    };
    serde_json::json!({
        "npc_reply": reply,
        "safety_gate": gate,
        "difficulty_factor": diff,
        "penalty_score": f,
        "Ct": c,
        "Et": e,
        "Pt": pt,
        "round_score": score,
        "mini_game_call": call,
        "safe_mode": gate_closed,
        "suggested_replies": ["I think I can try that.", "I'm not sure yet."],
    })
    .to_string()
}

/// Player texts and the provider script for one session.
fn plan(p: &Persona, rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<ScriptStep>) {
    let mut texts = Vec::new();
    let mut script = Vec::new();
    for round in 1..=MAX_ROUNDS {
        let fixture = p.safe_mode.as_ref().filter(|s| s.at_round == round);
        let text = match fixture {
            Some(SafeModeFixture { via: SafeModeVia::Lexicon, text, .. }) => {
                text.clone().unwrap_or_else(|| "Honestly I just want to die.".into())
            }
            _ => p.utterances.choose(rng).expect("non-empty").clone(),
        };
        texts.push(text);
        match fixture.map(|f| &f.via) {
            // the local screen blocks before any request is made
            Some(SafeModeVia::Lexicon) => {}
            Some(SafeModeVia::Gate) => script.push(ScriptStep::Reply(npc_reply(p, rng, round, true))),
            None => {
                if rng.random_bool(p.malformed_rate.clamp(0.0, 1.0)) {
                    script.push(ScriptStep::Reply("Sure! Here is my answer: the record is on its way".into()));
                }
                script.push(ScriptStep::Reply(npc_reply(p, rng, round, false)));
            }
        }
    }
    (texts, script)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameTally {
    pub started: u32,
    pub completed: u32,
    pub abandoned: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionEnd {
    Completed,
    SafeMode,
    Unfinished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub index: usize,
    pub persona: String,
    pub seed: u64,
    pub session_id: String,
    pub end: SessionEnd,
    pub rounds: u32,
    pub final_score: f64,
    pub repaired_replies: u32,
    pub suppressed_minigame_calls: u32,
    pub minigames: BTreeMap<String, GameTally>,
    pub events: usize,
    pub replay_identical: bool,
    /// For safe-mode endings: the blocking round added nothing.
    pub safe_mode_zero_score: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn breathing_events(state: &BreathingState, p: &Persona, rng: &mut ChaCha8Rng) -> Vec<MiniGameEvent> {
    let timing = state.timing;
    let mut out = Vec::new();
    let mut t = 0.5;
    let mut done = 0;
    let mut attempts = 0;
    while done < state.target_cycles && attempts < 4 * state.target_cycles + 4 {
        attempts += 1;
        out.push(MiniGameEvent::Press { timestamp: t });
        if rng.random_bool(p.breathing_slip_rate.clamp(0.0, 1.0)) {
            // let go during the hold: the cycle resets
            t += timing.inhale + 2.0;
            out.push(MiniGameEvent::Release { timestamp: t });
            t += 1.5;
            continue;
        }
        t += timing.inhale + timing.hold + rng.random_range(-0.9..0.9);
        out.push(MiniGameEvent::Release { timestamp: t });
        t += timing.exhale + rng.random_range(-0.9..0.9);
        done += 1;
    }
    // the final exhale ends on a tick rather than the next press
    out.push(MiniGameEvent::Tick { timestamp: t + 1.0 });
    out
}

fn grounding_form(p: &Persona, rng: &mut ChaCha8Rng) -> GroundingForm {
    let mut pool = p.grounding_pool.clone();
    pool.shuffle(rng);
    let mut it = pool.into_iter();
    let mut take = |n| (0..n).map(|_| it.next().expect("pool has 15 answers")).collect::<Vec<String>>();
    GroundingForm {
        see: take(5),
        touch: take(4),
        hear: take(3),
        smell: take(2),
        taste: take(1),
        image_ref: None,
    }
}

/// Next event for the active game, or `None` when the scripted moves ran out.
fn next_game_event(
    game: &MiniGameState,
    queue: &mut Option<Vec<MiniGameEvent>>,
    p: &Persona,
    rng: &mut ChaCha8Rng,
) -> MiniGameEvent {
    match game {
        MiniGameState::Breathing(s) => {
            let q = queue.get_or_insert_with(|| {
                let mut q = breathing_events(s, p, rng);
                q.reverse();
                q
            });
            q.pop().unwrap_or(MiniGameEvent::Abandon)
        }
        MiniGameState::Match3(s) => match s.board.find_chain() {
            Some(path) => MiniGameEvent::Chain { path },
            None => MiniGameEvent::Finish,
        },
        MiniGameState::FiveSenses(_) => MiniGameEvent::Submit {
            form: grounding_form(p, rng),
        },
    }
}

/// Runs one session to a terminal phase (or the round cap).
pub fn run_session(
    persona: &Persona,
    index: usize,
    seed: u64,
    config: EngineConfig,
    log_dir: Option<&Path>,
) -> SessionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (texts, script) = plan(persona, &mut rng);
    let provider = Arc::new(ScriptedProvider::new(script));
    let driver = GameDriver::new(SessionEngine::default(), AgentGateway::new(provider, RetryPolicy::none()));

    let mut report = SessionReport {
        index,
        persona: persona.name.clone(),
        seed,
        session_id: String::new(),
        end: SessionEnd::Unfinished,
        rounds: 0,
        final_score: 0.0,
        repaired_replies: 0,
        suppressed_minigame_calls: 0,
        minigames: GameKind::ALL.iter().map(|k| (k.to_string(), GameTally::default())).collect(),
        events: 0,
        replay_identical: false,
        safe_mode_zero_score: None,
        error: None,
    };

    let (mut state, mut events) = match driver.start(persona.profile.clone(), config, seed) {
        Ok(v) => v,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    report.session_id = state.session_id.to_string();
    let mut texts = texts.into_iter();
    let mut queue = None;
    let mut abandon_next = false;
    let mut score_before_last_turn = 0.0;

    let mut steps = 0;
    while !state.phase.is_terminal() && steps < 10_000 {
        steps += 1;
        match state.phase {
            Phase::Dialogue => {
                let Some(text) = texts.next() else { break };
                score_before_last_turn = state.cumulative_score;
                match driver.play_turn(&mut state, &text) {
                    Ok(played) => {
                        if played.reply.as_ref().is_some_and(|r| r.repaired) {
                            report.repaired_replies += 1;
                        }
                        if played.outcome.minigame_suppressed.is_some() {
                            report.suppressed_minigame_calls += 1;
                        }
                        if let Some(kind) = played.outcome.minigame_started {
                            report.minigames.get_mut(kind.as_str()).expect("tally").started += 1;
                            abandon_next = rng.random_bool(persona.abandon_rate.clamp(0.0, 1.0));
                            queue = None;
                        }
                        events.extend(played.events);
                    }
                    Err(e) => {
                        report.error = Some(e.to_string());
                        break;
                    }
                }
            }
            Phase::MiniGameActive => {
                let game = state.active_minigame.clone().expect("active game");
                let event = if abandon_next {
                    MiniGameEvent::Abandon
                } else {
                    next_game_event(&game, &mut queue, persona, &mut rng)
                };
                match driver.engine().handle_minigame_event(&mut state, event) {
                    Ok((outcome, evs)) => {
                        if let Some(result) = &outcome.result {
                            let tally = report.minigames.get_mut(result.game.as_str()).expect("tally");
                            if result.completed {
                                tally.completed += 1;
                            } else {
                                tally.abandoned += 1;
                            }
                        }
                        events.extend(evs);
                    }
                    Err(e) => {
                        report.error = Some(e.to_string());
                        break;
                    }
                }
            }
            other => {
                report.error = Some(format!("unexpected phase {other:?}"));
                break;
            }
        }
    }

    report.end = match state.phase {
        Phase::Completed => SessionEnd::Completed,
        Phase::SafeModeTerminated => SessionEnd::SafeMode,
        _ => SessionEnd::Unfinished,
    };
    report.rounds = state.round_index;
    report.final_score = state.cumulative_score;
    report.events = events.len();
    if report.end == SessionEnd::SafeMode {
        let last_awarded = state.latest_round().map_or(0.0, |r| r.score_awarded);
        report.safe_mode_zero_score =
            Some(last_awarded == 0.0 && state.cumulative_score == score_before_last_turn);
    }

    // encode, decode and replay the log; the replayed state must match exactly
    let text: String = events
        .iter()
        .map(|e| {
            let mut line = EventRecord {
                ts: "1970-01-01T00:00:00.000Z".into(),
                session_id: state.session_id,
                payload: e.clone(),
            }
            .to_line();
            line.push('\n');
            line
        })
        .collect();
    let decoded = decode_log(&text);
    let replayed_events: Vec<EventPayload> = decoded.records.into_iter().map(|r| r.payload).collect();
    report.replay_identical = decoded.warning.is_none()
        && match driver.engine().replay(replayed_events.iter()) {
            Ok(replayed) => {
                replayed == state
                    && serde_json::to_string(&replayed).ok() == serde_json::to_string(&state).ok()
            }
            Err(_) => false,
        };

    if let Some(dir) = log_dir {
        let path = dir.join(format!("{:04}-{}.jsonl", index, state.session_id));
        if let Err(e) = crate::store::write_log(&path, state.session_id, &events) {
            report.error.get_or_insert(e.to_string());
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub min: u32,
    pub median: f64,
    pub max: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PersonaTally {
    pub sessions: u32,
    pub completed: u32,
    pub safe_mode: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub sessions: usize,
    pub seed: u64,
    pub completed: usize,
    pub safe_mode: usize,
    pub unfinished: usize,
    pub safe_mode_rate: f64,
    pub rounds_to_completion: Option<Spread>,
    pub minigames: BTreeMap<String, GameTally>,
    pub suppressed_minigame_calls: u32,
    pub repaired_replies: u32,
    pub replay_identical: usize,
    pub safe_mode_zero_score: bool,
    pub personas: BTreeMap<String, PersonaTally>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<SessionReport>,
}

impl SimulationSummary {
    /// Every session ended (completed or safe mode) and replayed identically.
    pub fn all_ok(&self) -> bool {
        self.unfinished == 0 && self.replay_identical == self.sessions && self.safe_mode_zero_score
    }
}

pub struct SimOptions<'a> {
    pub sessions: usize,
    pub seed: u64,
    pub config: EngineConfig,
    pub log_dir: Option<&'a Path>,
    pub details: bool,
}

pub fn simulate(personas: &PersonaFile, opts: &SimOptions<'_>) -> SimulationSummary {
    let mut master = ChaCha8Rng::seed_from_u64(opts.seed);
    let weights: Vec<f64> = personas.personas.iter().map(|p| p.weight).collect();
    let total: f64 = weights.iter().sum();
    let mut reports = Vec::with_capacity(opts.sessions);
    for index in 0..opts.sessions {
        let session_seed: u64 = master.random();
        let mut u = master.random_range(0.0..total);
        let mut chosen = personas.personas.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                chosen = i;
                break;
            }
            u -= w;
        }
        reports.push(run_session(&personas.personas[chosen], index, session_seed, opts.config, opts.log_dir));
    }
    summarize(reports, opts)
}

fn summarize(reports: Vec<SessionReport>, opts: &SimOptions<'_>) -> SimulationSummary {
    let count = |e: SessionEnd| reports.iter().filter(|r| r.end == e).count();
    let mut rounds: Vec<u32> = reports
        .iter()
        .filter(|r| r.end == SessionEnd::Completed)
        .map(|r| r.rounds)
        .collect();
    rounds.sort_unstable();
    let rounds_to_completion = (!rounds.is_empty()).then(|| {
        let n = rounds.len();
        Spread {
            mean: f64::from(rounds.iter().sum::<u32>()) / n as f64,
            min: rounds[0],
            median: if n % 2 == 1 {
                f64::from(rounds[n / 2])
            } else {
                f64::from(rounds[n / 2 - 1] + rounds[n / 2]) / 2.0
            },
            max: rounds[n - 1],
        }
    });
    let mut minigames: BTreeMap<String, GameTally> = BTreeMap::new();
    let mut personas: BTreeMap<String, PersonaTally> = BTreeMap::new();
    for r in &reports {
        for (k, t) in &r.minigames {
            let m = minigames.entry(k.clone()).or_default();
            m.started += t.started;
            m.completed += t.completed;
            m.abandoned += t.abandoned;
        }
        let p = personas.entry(r.persona.clone()).or_default();
        p.sessions += 1;
        p.completed += u32::from(r.end == SessionEnd::Completed);
        p.safe_mode += u32::from(r.end == SessionEnd::SafeMode);
    }
    let safe_mode = count(SessionEnd::SafeMode);
    SimulationSummary {
        sessions: reports.len(),
        seed: opts.seed,
        completed: count(SessionEnd::Completed),
        safe_mode,
        unfinished: count(SessionEnd::Unfinished),
        safe_mode_rate: if reports.is_empty() { 0.0 } else { safe_mode as f64 / reports.len() as f64 },
        rounds_to_completion,
        minigames,
        suppressed_minigame_calls: reports.iter().map(|r| r.suppressed_minigame_calls).sum(),
        repaired_replies: reports.iter().map(|r| r.repaired_replies).sum(),
        replay_identical: reports.iter().filter(|r| r.replay_identical).count(),
        safe_mode_zero_score: reports.iter().all(|r| r.safe_mode_zero_score != Some(false)),
        personas,
        details: if opts.details { reports } else { Vec::new() },
    }
}
