//! Trial data files: `participants.csv`, `scales.csv` (long format) and `vas.csv`.
//!
//! Ingestion is strict. Any unknown id, instrument, duplicated or missing item
//! aborts with the file, line and column of the offending cell.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};
use crate::scales::InstrumentRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Intervention,
    Control,
}

impl Group {
    /// Regression indicator: 1 for the intervention arm.
    pub fn indicator(self) -> f64 {
        match self {
            Group::Intervention => 1.0,
            Group::Control => 0.0,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Intervention => "intervention",
            Group::Control => "control",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Timepoint {
    T0,
    T2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub group: Group,
    pub age: f64,
    pub gender: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleResponse {
    pub id: String,
    pub timepoint: Timepoint,
    pub instrument: String,
    /// Item values in item order (item 1 first).
    pub items: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VasRecord {
    pub id: String,
    pub day: u32,
    pub vas: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialDataset {
    pub participants: Vec<Participant>,
    pub scale_responses: Vec<ScaleResponse>,
    pub vas_records: Vec<VasRecord>,
}

#[derive(Debug, Deserialize, Serialize)]
struct ScaleRow {
    id: String,
    timepoint: Timepoint,
    instrument: String,
    item_index: usize,
    value: i32,
}

pub const PARTICIPANTS_FILE: &str = "participants.csv";
pub const SCALES_FILE: &str = "scales.csv";
pub const VAS_FILE: &str = "vas.csv";
pub const VAS_DAYS: std::ops::RangeInclusive<u32> = 1..=14;

fn csv_err(file: &str, line: u64, column: &str, message: impl Into<String>) -> StatsError {
    StatsError::Csv {
        file: file.to_string(),
        row: line as usize,
        column: column.to_string(),
        message: message.into(),
    }
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(file: &str, reader: R) -> Result<Vec<(u64, T)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| csv_err(file, 1, "header", e.to_string()))?
        .clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(file, line, "-", e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: T = rec.deserialize(Some(&headers)).map_err(|e| {
            let column = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err
                    .field()
                    .and_then(|f| headers.get(f as usize))
                    // enum and custom errors carry no field index; find the quoted cell instead
                    .or_else(|| {
                        let msg = err.to_string();
                        headers
                            .iter()
                            .zip(rec.iter())
                            .find(|(_, cell)| !cell.is_empty() && msg.contains(&format!("`{cell}`")))
                            .map(|(h, _)| h)
                    })
                    .unwrap_or("-")
                    .to_string(),
                _ => "-".to_string(),
            };
            csv_err(file, line, &column, e.to_string())
        })?;
        out.push((line, row));
    }
    Ok(out)
}

impl TrialDataset {
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let open = |name: &str| {
            std::fs::File::open(dir.join(name)).map_err(|e| StatsError::Io(format!("{}: {e}", dir.join(name).display())))
        };
        let vas = match open(VAS_FILE) {
            Ok(f) => Some(f),
            Err(_) if !dir.join(VAS_FILE).exists() => None,
            Err(e) => return Err(e),
        };
        Self::from_readers(open(PARTICIPANTS_FILE)?, open(SCALES_FILE)?, vas, &InstrumentRegistry::builtin())
    }

    /// Parses and validates the three tables. A missing VAS table yields no records.
    pub fn from_readers<P: Read, S: Read, V: Read>(
        participants: P,
        scales: S,
        vas: Option<V>,
        registry: &InstrumentRegistry,
    ) -> Result<Self> {
        let mut ids = BTreeSet::new();
        let mut people = Vec::new();
        for (line, p) in read_rows::<Participant, _>(PARTICIPANTS_FILE, participants)? {
            if !ids.insert(p.id.clone()) {
                return Err(csv_err(PARTICIPANTS_FILE, line, "id", format!("duplicate id `{}`", p.id)));
            }
            people.push(p);
        }

        type Key = (String, Timepoint, String);
        let mut grouped: BTreeMap<Key, (u64, BTreeMap<usize, i32>)> = BTreeMap::new();
        for (line, row) in read_rows::<ScaleRow, _>(SCALES_FILE, scales)? {
            if !ids.contains(&row.id) {
                return Err(csv_err(SCALES_FILE, line, "id", format!("unknown participant `{}`", row.id)));
            }
            let instrument = registry
                .get(&row.instrument)
                .map_err(|e| csv_err(SCALES_FILE, line, "instrument", e.to_string()))?;
            let (min, max) = instrument.response_range();
            if row.item_index == 0 || row.item_index > instrument.item_count() {
                return Err(csv_err(
                    SCALES_FILE,
                    line,
                    "item_index",
                    format!("{} has items 1..={}", instrument.name(), instrument.item_count()),
                ));
            }
            if row.value < min || row.value > max {
                return Err(csv_err(SCALES_FILE, line, "value", format!("{} outside {min}..={max}", row.value)));
            }
            let entry = grouped
                .entry((row.id.clone(), row.timepoint, row.instrument.clone()))
                .or_insert_with(|| (line, BTreeMap::new()));
            if entry.1.insert(row.item_index, row.value).is_some() {
                return Err(csv_err(SCALES_FILE, line, "item_index", format!("item {} repeated", row.item_index)));
            }
        }
        let mut responses = Vec::new();
        for ((id, timepoint, name), (line, items)) in grouped {
            let instrument = registry.get(&name)?;
            if items.len() != instrument.item_count() {
                return Err(csv_err(
                    SCALES_FILE,
                    line,
                    "item_index",
                    format!(
                        "{name} for `{id}` at {timepoint:?} has {} of {} items",
                        items.len(),
                        instrument.item_count()
                    ),
                ));
            }
            responses.push(ScaleResponse {
                id,
                timepoint,
                instrument: name,
                items: items.into_values().collect(),
            });
        }

        let mut vas_records = Vec::new();
        if let Some(v) = vas {
            let mut seen = BTreeSet::new();
            for (line, r) in read_rows::<VasRecord, _>(VAS_FILE, v)? {
                if !ids.contains(&r.id) {
                    return Err(csv_err(VAS_FILE, line, "id", format!("unknown participant `{}`", r.id)));
                }
                if !VAS_DAYS.contains(&r.day) {
                    return Err(csv_err(VAS_FILE, line, "day", format!("day {} outside 1..=14", r.day)));
                }
                if !(0.0..=10.0).contains(&r.vas) {
                    return Err(csv_err(VAS_FILE, line, "vas", format!("{} outside 0..=10", r.vas)));
                }
                if !seen.insert((r.id.clone(), r.day)) {
                    return Err(csv_err(VAS_FILE, line, "day", format!("day {} repeated for `{}`", r.day, r.id)));
                }
                vas_records.push(r);
            }
        }
        Ok(TrialDataset {
            participants: people,
            scale_responses: responses,
            vas_records,
        })
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| StatsError::Io(e.to_string()))?;
        let io = |e: std::io::Error| StatsError::Io(e.to_string());
        let create = |name: &str| std::fs::File::create(dir.join(name)).map_err(io);

        let mut w = csv::Writer::from_writer(create(PARTICIPANTS_FILE)?);
        for p in &self.participants {
            w.serialize(p).map_err(|e| StatsError::Io(e.to_string()))?;
        }
        w.flush().map_err(io)?;

        let mut w = csv::Writer::from_writer(create(SCALES_FILE)?);
        for r in &self.scale_responses {
            for (i, &value) in r.items.iter().enumerate() {
                w.serialize(ScaleRow {
                    id: r.id.clone(),
                    timepoint: r.timepoint,
                    instrument: r.instrument.clone(),
                    item_index: i + 1,
                    value,
                })
                .map_err(|e| StatsError::Io(e.to_string()))?;
            }
        }
        w.flush().map_err(io)?;

        let mut w = csv::Writer::from_writer(create(VAS_FILE)?);
        for r in &self.vas_records {
            w.serialize(r).map_err(|e| StatsError::Io(e.to_string()))?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    pub fn group_of(&self, id: &str) -> Option<Group> {
        self.participants.iter().find(|p| p.id == id).map(|p| p.group)
    }

    pub fn responses<'a>(
        &'a self,
        instrument: &'a str,
        timepoint: Timepoint,
    ) -> impl Iterator<Item = &'a ScaleResponse> + 'a {
        self.scale_responses
            .iter()
            .filter(move |r| r.instrument == instrument && r.timepoint == timepoint)
    }
}
