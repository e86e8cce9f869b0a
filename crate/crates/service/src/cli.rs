//! The `reverie` command line.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use reverie_core::agent::{AgentGateway, ProviderRegistry, RetryPolicy, ScriptedProvider};
use reverie_core::minigames::{Cell, GroundingForm, MiniGameEvent, MiniGameState};
use reverie_core::{EngineConfig, GameDriver, Phase, PlayerProfile, SessionEngine, SessionState};
use reverie_stats::simulate::{simulate_trial, Calibration};
use reverie_stats::{analyze_trial, InstrumentRegistry, TrialDataset};

use crate::config::ServiceConfig;
use crate::sim::{simulate, PersonaFile, SimOptions};
use crate::store::EventStore;

#[derive(Debug, Parser)]
#[command(name = "reverie", version, about = "Stress-relief dialogue game engine and trial analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play one session in the terminal.
    Play {
        /// Service configuration (provider, thresholds, lexicon).
        #[arg(long, conflicts_with = "scripted")]
        config: Option<PathBuf>,
        /// JSON fixture list for the offline scripted provider.
        #[arg(long)]
        scripted: Option<PathBuf>,
        /// Player profile as JSON: {age, gender, identity, stressor_text}.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the session's event log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run persona-driven sessions offline and print a summary.
    Simulate {
        #[arg(long, default_value_t = 50)]
        sessions: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Persona file; the bundled personas are used when omitted.
        #[arg(long)]
        personas: Option<PathBuf>,
        /// Write one JSONL log per session into this directory.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        /// Include per-session records in the summary.
        #[arg(long)]
        details: bool,
        #[arg(long, default_value_t = reverie_core::session::DEFAULT_PASS_THRESHOLD)]
        pass_threshold: f64,
    },
    /// Analyze a trial data directory and write report.json and report.md.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic trial data directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Score a wide CSV (id, item1..itemN) with one instrument.
    ScoreScales {
        #[arg(long)]
        instrument: String,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `server.bind` from the configuration.
        #[arg(long)]
        bind: Option<String>,
    },
}

/// Parses arguments and runs; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    // repaired replies are routine in batch runs; only surface errors there
    let default_level = match cli.command {
        Command::Simulate { .. } => "error",
        _ => "warn",
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| default_level.into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn run(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Play {
            config,
            scripted,
            profile,
            seed,
            log,
        } => play(config, scripted, profile, seed, log),
        Command::Simulate {
            sessions,
            seed,
            personas,
            log_dir,
            details,
            pass_threshold,
        } => {
            let personas = match personas {
                Some(p) => PersonaFile::load(&p)?,
                None => PersonaFile::bundled(),
            };
            let config = EngineConfig {
                pass_threshold,
                ..EngineConfig::default()
            };
            config.validate()?;
            if let Some(dir) = &log_dir {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let summary = simulate(
                &personas,
                &SimOptions {
                    sessions,
                    seed,
                    config,
                    log_dir: log_dir.as_deref(),
                    details,
                },
            );
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(if summary.all_ok() { 0 } else { 1 })
        }
        Command::Analyze { data, out } => {
            let ds = TrialDataset::load_dir(&data)?;
            let report = analyze_trial(&ds, &InstrumentRegistry::builtin())?;
            report.write(&out)?;
            println!("wrote {} and {}", out.join("report.json").display(), out.join("report.md").display());
            Ok(0)
        }
        Command::Synth { out, seed } => {
            simulate_trial(&Calibration::default(), seed).write_dir(&out)?;
            println!("wrote synthetic trial data to {}", out.display());
            Ok(0)
        }
        Command::ScoreScales { instrument, csv } => {
            score_scales(&instrument, &csv)?;
            Ok(0)
        }
        Command::Serve { config, bind } => serve(&config, bind),
    }
}

fn score_scales(name: &str, path: &Path) -> anyhow::Result<()> {
    let registry = InstrumentRegistry::builtin();
    let instrument = registry.get(name)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut out = csv::Writer::from_writer(std::io::stdout().lock());
    let mut header_written = false;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.with_context(|| format!("{}:{line}", path.display()))?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let items = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<i32>()
                    .with_context(|| format!("{}:{line}: column {} is not an integer: `{cell}`", path.display(), col + 2))
            })
            .collect::<anyhow::Result<Vec<i32>>>()?;
        let score = instrument
            .score(&items)
            .with_context(|| format!("{}:{line}: participant `{id}`", path.display()))?;
        let values = score.values();
        if !header_written {
            out.write_record(std::iter::once("id".to_string()).chain(values.iter().map(|(k, _)| k.clone())))?;
            header_written = true;
        }
        out.write_record(std::iter::once(id).chain(values.iter().map(|(_, v)| format!("{v}"))))?;
    }
    out.flush()?;
    Ok(())
}

fn serve(config_path: &Path, bind: Option<String>) -> anyhow::Result<i32> {
    let cfg = ServiceConfig::load(config_path)?;
    let provider = ProviderRegistry::builtin().build(&cfg.provider)?;
    let gateway = AgentGateway::new(provider, cfg.provider.retry_policy()).with_temperature(cfg.provider.temperature);
    let driver = GameDriver::new(SessionEngine::new(cfg.lexicon()?), gateway);
    let store = EventStore::open(&cfg.engine.data_dir)?;
    let app = crate::api::AppState::new(driver, store, cfg.engine_config())?;
    let addr = bind.unwrap_or_else(|| cfg.server.bind.clone());
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!(%addr, "listening");
        eprintln!("listening on {addr}");
        axum::serve(listener, crate::api::router(app)).await?;
        anyhow::Ok(())
    })?;
    Ok(0)
}

fn default_profile() -> PlayerProfile {
    PlayerProfile {
        age: 21,
        gender: "unspecified".into(),
        identity: "student".into(),
        stressor_text: "Exams are coming up and I feel behind.".into(),
    }
}

fn play(
    config: Option<PathBuf>,
    scripted: Option<PathBuf>,
    profile: Option<PathBuf>,
    seed: u64,
    log: Option<PathBuf>,
) -> anyhow::Result<i32> {
    let (driver, engine_config) = match (config, scripted) {
        (Some(path), _) => {
            let cfg = ServiceConfig::load(&path)?;
            let provider = ProviderRegistry::builtin().build(&cfg.provider)?;
            let gateway =
                AgentGateway::new(provider, cfg.provider.retry_policy()).with_temperature(cfg.provider.temperature);
            (GameDriver::new(SessionEngine::new(cfg.lexicon()?), gateway), cfg.engine_config())
        }
        (None, Some(path)) => {
            let provider = ScriptedProvider::from_file(&path)?;
            let gateway = AgentGateway::new(Arc::new(provider), RetryPolicy::none());
            (GameDriver::new(SessionEngine::default(), gateway), EngineConfig::default())
        }
        (None, None) => bail!("play needs --config or --scripted"),
    };
    let profile = match profile {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)
            .context("profile JSON")?,
        None => default_profile(),
    };

    let (mut state, mut events) = driver.start(profile, engine_config, seed)?;
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let mut out = std::io::stdout().lock();
    if let Some(scene) = &state.scene {
        writeln!(out, "== {} ==\n{}\n", scene.name, scene.description)?;
    }
    writeln!(out, "Type your reply and press Enter. /exit leaves the session.")?;

    let mut line = String::new();
    while !state.phase.is_terminal() {
        match state.phase {
            Phase::Dialogue => {
                write!(out, "> ")?;
                out.flush()?;
                line.clear();
                if input.read_line(&mut line)? == 0 {
                    break;
                }
                let text = line.trim();
                if text.is_empty() {
                    continue;
                }
                if text == "/exit" || text == "/quit" {
                    events.extend(driver.engine().exit_session(&mut state)?);
                    break;
                }
                match driver.play_turn(&mut state, text) {
                    Ok(played) => {
                        events.extend(played.events);
                        print_turn(&mut out, &state)?;
                    }
                    Err(e) => writeln!(out, "[error] {e}")?,
                }
            }
            Phase::MiniGameActive => {
                let game = state.active_minigame.clone().expect("active game");
                let event = match prompt_minigame(&mut input, &mut out, &game)? {
                    Some(e) => e,
                    None => break,
                };
                match driver.engine().handle_minigame_event(&mut state, event) {
                    Ok((outcome, evs)) => {
                        events.extend(evs);
                        if let Some(result) = outcome.result {
                            writeln!(
                                out,
                                "[{}] {} (+{:.1} points)",
                                result.game,
                                if result.completed { "completed" } else { "abandoned" },
                                outcome.bonus
                            )?;
                            print_progress(&mut out, &state)?;
                        }
                    }
                    Err(e) => writeln!(out, "[error] {e}")?,
                }
            }
            _ => break,
        }
    }

    match state.phase {
        Phase::Completed => writeln!(out, "\nThe clouds have cleared. Session complete.")?,
        Phase::SafeModeTerminated => writeln!(out, "\nThe session has ended for your safety.")?,
        _ => writeln!(out, "\nSession ended.")?,
    }
    if let Some(path) = log {
        crate::store::write_log(&path, state.session_id, &events)?;
    }
    Ok(0)
}

fn print_progress(out: &mut impl Write, s: &SessionState) -> std::io::Result<()> {
    writeln!(
        out,
        "[score {:.1} / {:.0}, clouds {:.0}%]",
        s.cumulative_score,
        s.pass_threshold,
        100.0 * s.cloud_opacity()
    )
}

fn print_turn(out: &mut impl Write, s: &SessionState) -> std::io::Result<()> {
    if let Some(round) = s.latest_round() {
        writeln!(out, "\nNPC: {}", round.turn.turn.npc_reply)?;
        for (i, r) in round.turn.turn.suggested_replies.iter().enumerate() {
            writeln!(out, "  ({}) {r}", i + 1)?;
        }
        writeln!(out, "[round {}: +{:.1}]", round.round_index, round.score_awarded)?;
    }
    print_progress(out, s)
}

fn read_trimmed(input: &mut impl BufRead) -> std::io::Result<Option<String>> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim().to_string()))
}

fn prompt_minigame(
    input: &mut impl BufRead,
    out: &mut impl Write,
    game: &MiniGameState,
) -> anyhow::Result<Option<MiniGameEvent>> {
    thread_local!(static CLOCK: Instant = Instant::now());
    let now = || CLOCK.with(|c| c.elapsed().as_secs_f64());
    match game {
        MiniGameState::Breathing(s) => {
            writeln!(
                out,
                "[breathing {}/{}] Enter to press or release, q to stop. Inhale {}s, hold {}s, exhale {}s.",
                s.completed_cycles, s.target_cycles, s.timing.inhale, s.timing.hold, s.timing.exhale
            )?;
            out.flush()?;
            let Some(cmd) = read_trimmed(input)? else { return Ok(None) };
            let t = now();
            Ok(Some(match (cmd.as_str(), s.phase) {
                ("q", _) => MiniGameEvent::Abandon,
                (_, reverie_core::minigames::BreathPhase::Inhale | reverie_core::minigames::BreathPhase::Hold) => {
                    MiniGameEvent::Release { timestamp: t }
                }
                _ => MiniGameEvent::Press { timestamp: t },
            }))
        }
        MiniGameState::Match3(s) => {
            writeln!(out, "[match-3] score {} of {}", s.board.score, s.target_tiles)?;
            for row in s.board.rows() {
                let cells: Vec<String> = row.iter().map(u8::to_string).collect();
                writeln!(out, "  {}", cells.join(" "))?;
            }
            writeln!(out, "Enter a chain as `row,col row,col row,col`, or `done` / `q`.")?;
            out.flush()?;
            let Some(cmd) = read_trimmed(input)? else { return Ok(None) };
            Ok(Some(match cmd.as_str() {
                "q" => MiniGameEvent::Abandon,
                "done" => MiniGameEvent::Finish,
                _ => {
                    let path: Option<Vec<Cell>> = cmd
                        .split_whitespace()
                        .map(|p| {
                            let (r, c) = p.split_once(',')?;
                            Some(Cell(r.trim().parse().ok()?, c.trim().parse().ok()?))
                        })
                        .collect();
                    match path {
                        Some(path) => MiniGameEvent::Chain { path },
                        None => {
                            writeln!(out, "could not read that chain")?;
                            return prompt_minigame(input, out, game);
                        }
                    }
                }
            }))
        }
        MiniGameState::FiveSenses(_) => {
            writeln!(out, "[5-4-3-2-1 grounding] Separate answers with commas. q stops.")?;
            let mut form = GroundingForm::default();
            for (label, n) in [("see", 5), ("touch", 4), ("hear", 3), ("smell", 2), ("taste", 1)] {
                write!(out, "{n} things you {label}: ")?;
                out.flush()?;
                let Some(text) = read_trimmed(input)? else { return Ok(None) };
                if text == "q" {
                    return Ok(Some(MiniGameEvent::Abandon));
                }
                let answers: Vec<String> = text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                match label {
                    "see" => form.see = answers,
                    "touch" => form.touch = answers,
                    "hear" => form.hear = answers,
                    "smell" => form.smell = answers,
                    _ => form.taste = answers,
                }
            }
            Ok(Some(MiniGameEvent::Submit { form }))
        }
    }
}
