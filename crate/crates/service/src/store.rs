//! Append-only JSONL event logs, one file per session under `sessions/`.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use reverie_core::events::decode_log;
use reverie_core::{EventPayload, EventRecord, SessionEngine, SessionState};
use thiserror::Error;
use uuid::Uuid;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("storage I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("log {path} does not replay: {message}")]
    Replay { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StorageError + '_ {
    move |source| StorageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// One replayed session and whatever went wrong reading its log.
pub struct Recovered {
    pub state: SessionState,
    pub warning: Option<String>,
}

pub struct EventStore {
    root: PathBuf,
    vas_lock: Mutex<()>,
}

impl EventStore {
    pub fn open(data_dir: &Path) -> Result<Self, StorageError> {
        let sessions = data_dir.join("sessions");
        std::fs::create_dir_all(&sessions).map_err(io_err(&sessions))?;
        Ok(EventStore {
            root: data_dir.to_path_buf(),
            vas_lock: Mutex::new(()),
        })
    }

    pub fn log_path(&self, id: Uuid) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.jsonl"))
    }

    /// Writes all events as complete lines in one write, then flushes and syncs.
    pub fn append(&self, id: Uuid, events: &[EventPayload]) -> Result<(), StorageError> {
        if events.is_empty() {
            return Ok(());
        }
        let path = self.log_path(id);
        let ts = timestamp();
        let mut buf = String::new();
        for e in events {
            buf.push_str(
                &EventRecord {
                    ts: ts.clone(),
                    session_id: id,
                    payload: e.clone(),
                }
                .to_line(),
            );
            buf.push('\n');
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        f.write_all(buf.as_bytes()).map_err(io_err(&path))?;
        f.flush().map_err(io_err(&path))?;
        f.sync_data().map_err(io_err(&path))?;
        Ok(())
    }

    pub fn exists(&self, id: Uuid) -> bool {
        self.log_path(id).exists()
    }

    pub fn read(&self, id: Uuid) -> Result<(Vec<EventPayload>, Option<String>), StorageError> {
        let path = self.log_path(id);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let decoded = decode_log(&text);
        Ok((decoded.records.into_iter().map(|r| r.payload).collect(), decoded.warning))
    }

    pub fn replay(&self, engine: &SessionEngine, id: Uuid) -> Result<Recovered, StorageError> {
        let (events, warning) = self.read(id)?;
        let state = engine.replay(events.iter()).map_err(|e| StorageError::Replay {
            path: self.log_path(id),
            message: e.to_string(),
        })?;
        Ok(Recovered { state, warning })
    }

    /// Ids of every stored session, sorted.
    pub fn session_ids(&self) -> Result<Vec<Uuid>, StorageError> {
        let dir = self.root.join("sessions");
        let mut ids: Vec<Uuid> = std::fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                Uuid::parse_str(name.strip_suffix(".jsonl")?).ok()
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn vas_path(&self) -> PathBuf {
        self.root.join("vas.csv")
    }

    /// Appends a row to `vas.csv` (header `id,day,vas`) and returns the day used.
    /// Without an explicit day, the next day for this id is taken.
    pub fn append_vas(&self, id: &str, day: Option<u32>, value: f64) -> Result<u32, StorageError> {
        let _guard = self.vas_lock.lock().unwrap_or_else(|p| p.into_inner());
        let path = self.vas_path();
        let existing = std::fs::read_to_string(&path).unwrap_or_default();
        let day = day.unwrap_or_else(|| {
            existing
                .lines()
                .skip(1)
                .filter(|l| l.split(',').next() == Some(id))
                .count() as u32
                + 1
        });
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        let mut line = String::new();
        if existing.is_empty() {
            line.push_str("id,day,vas\n");
        }
        line.push_str(&format!("{id},{day},{value}\n"));
        f.write_all(line.as_bytes()).map_err(io_err(&path))?;
        f.sync_data().map_err(io_err(&path))?;
        Ok(day)
    }
}

/// Writes a complete log for `events` to `path` (used by batch simulation).
pub fn write_log(path: &Path, id: Uuid, events: &[EventPayload]) -> Result<(), StorageError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    for e in events {
        let line = EventRecord {
            ts: timestamp(),
            session_id: id,
            payload: e.clone(),
        }
        .to_line();
        writeln!(f, "{line}").map_err(io_err(path))?;
    }
    f.sync_data().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use reverie_core::{EngineConfig, PlayerProfile, SceneSpec};

    fn setup() -> (tempfile::TempDir, EventStore, SessionEngine, SessionState, Vec<EventPayload>) {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path()).unwrap();
        let engine = SessionEngine::default();
        let profile = PlayerProfile {
            age: 20,
            gender: "male".into(),
            identity: "student".into(),
            stressor_text: "thesis deadline".into(),
        };
        let (mut s, mut ev) = engine.create_session(profile, EngineConfig::default(), 1).unwrap();
        let scene = SceneSpec {
            name: "Lake".into(),
            description: "A still lake.".into(),
            image_ref: "placeholder:x".into(),
        };
        ev.extend(engine.enter_scene(&mut s, scene).unwrap());
        (dir, store, engine, s, ev)
    }

    #[test]
    fn n_events_make_n_lines_and_replay() {
        let (_dir, store, engine, state, events) = setup();
        store.append(state.session_id, &events[..1]).unwrap();
        store.append(state.session_id, &events[1..]).unwrap();
        let text = std::fs::read_to_string(store.log_path(state.session_id)).unwrap();
        assert_eq!(text.lines().count(), events.len());
        let r = store.replay(&engine, state.session_id).unwrap();
        assert_eq!(r.state, state);
        assert!(r.warning.is_none());
        assert_eq!(store.session_ids().unwrap(), [state.session_id]);
    }

    #[test]
    fn torn_tail_replays_to_the_last_complete_event() {
        let (_dir, store, engine, state, events) = setup();
        store.append(state.session_id, &events).unwrap();
        let path = store.log_path(state.session_id);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"ts":"x","session_id":"#).unwrap();
        let r = store.replay(&engine, state.session_id).unwrap();
        assert_eq!(r.state, state);
        assert!(r.warning.unwrap().contains("truncated"));
    }

    #[test]
    fn vas_rows_number_days() {
        let (_dir, store, ..) = setup();
        assert_eq!(store.append_vas("a", None, 7.5).unwrap(), 1);
        assert_eq!(store.append_vas("a", None, 6.0).unwrap(), 2);
        assert_eq!(store.append_vas("b", Some(4), 5.0).unwrap(), 4);
        let text = std::fs::read_to_string(store.vas_path()).unwrap();
        assert_eq!(text, "id,day,vas\na,1,7.5\na,2,6\nb,4,5\n");
    }
}
