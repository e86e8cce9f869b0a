//! Questionnaire scorers. Each instrument is an [`Instrument`] trait object
//! registered by name in an [`InstrumentRegistry`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subscale {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleScore {
    pub instrument: String,
    pub total: Option<f64>,
    pub subscales: Vec<Subscale>,
}

impl ScaleScore {
    fn new(instrument: &str, total: Option<f64>, subscales: Vec<(&str, f64)>) -> Self {
        ScaleScore {
            instrument: instrument.to_string(),
            total,
            subscales: subscales
                .into_iter()
                .map(|(name, value)| Subscale {
                    name: name.to_string(),
                    value,
                })
                .collect(),
        }
    }

    pub fn subscale(&self, name: &str) -> Option<f64> {
        self.subscales.iter().find(|s| s.name == name).map(|s| s.value)
    }

    /// Total first (named `total`), then subscales in key order.
    pub fn values(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        if let Some(t) = self.total {
            out.push(("total".to_string(), t));
        }
        out.extend(self.subscales.iter().map(|s| (s.name.clone(), s.value)));
        out
    }
}

pub trait Instrument: Send + Sync {
    fn name(&self) -> &'static str;
    fn item_count(&self) -> usize;
    /// Inclusive response range.
    fn response_range(&self) -> (i32, i32);
    /// Scores a response vector that has already passed [`Instrument::check`].
    fn score_checked(&self, items: &[i32]) -> ScaleScore;

    fn check(&self, items: &[i32]) -> Result<()> {
        if items.len() != self.item_count() {
            return Err(StatsError::WrongItemCount {
                instrument: self.name().into(),
                expected: self.item_count(),
                got: items.len(),
            });
        }
        let (min, max) = self.response_range();
        if let Some((i, &v)) = items.iter().enumerate().find(|(_, &v)| v < min || v > max) {
            return Err(StatsError::OutOfRange {
                instrument: self.name().into(),
                item: i + 1,
                value: v,
                min,
                max,
            });
        }
        Ok(())
    }

    fn score(&self, items: &[i32]) -> Result<ScaleScore> {
        self.check(items)?;
        Ok(self.score_checked(items))
    }
}

pub struct Pss10;

/// 1-based items scored as `4 − raw`.
pub const PSS10_REVERSED: [usize; 4] = [4, 5, 7, 8];

impl Instrument for Pss10 {
    fn name(&self) -> &'static str {
        "pss10"
    }
    fn item_count(&self) -> usize {
        10
    }
    fn response_range(&self) -> (i32, i32) {
        (0, 4)
    }
    fn score_checked(&self, items: &[i32]) -> ScaleScore {
        let total: i32 = items
            .iter()
            .enumerate()
            .map(|(i, &v)| if PSS10_REVERSED.contains(&(i + 1)) { 4 - v } else { v })
            .sum();
        ScaleScore::new(self.name(), Some(f64::from(total)), vec![])
    }
}

pub struct Cerq;

/// Subscales in item order; subscale `k` is items `4k+1 ..= 4k+4`.
pub const CERQ_SUBSCALES: [&str; 9] = [
    "self_blame",
    "acceptance",
    "rumination",
    "positive_refocusing",
    "refocus_on_planning",
    "positive_reappraisal",
    "putting_into_perspective",
    "catastrophizing",
    "blaming_others",
];

impl Instrument for Cerq {
    fn name(&self) -> &'static str {
        "cerq"
    }
    fn item_count(&self) -> usize {
        36
    }
    fn response_range(&self) -> (i32, i32) {
        (1, 5)
    }
    fn score_checked(&self, items: &[i32]) -> ScaleScore {
        let subs = CERQ_SUBSCALES
            .iter()
            .zip(items.chunks(4))
            .map(|(name, block)| (*name, f64::from(block.iter().sum::<i32>())))
            .collect();
        ScaleScore::new(self.name(), None, subs)
    }
}

pub struct GeqCore;

/// 1-based item numbers per dimension of the 33-item core module.
pub const GEQ_CORE_KEY: [(&str, &[usize]); 7] = [
    ("competence", &[2, 10, 15, 17, 21]),
    ("immersion", &[3, 12, 18, 19, 27, 30]),
    ("flow", &[5, 13, 25, 28, 31]),
    ("tension", &[22, 24, 29]),
    ("challenge", &[11, 23, 26, 32, 33]),
    ("negative_affect", &[7, 8, 9, 16]),
    ("positive_affect", &[1, 4, 6, 14, 20]),
];

impl Instrument for GeqCore {
    fn name(&self) -> &'static str {
        "geq_core"
    }
    fn item_count(&self) -> usize {
        33
    }
    fn response_range(&self) -> (i32, i32) {
        (0, 4)
    }
    fn score_checked(&self, items: &[i32]) -> ScaleScore {
        let dims = GEQ_CORE_KEY
            .iter()
            .map(|(name, key)| {
                let sum: i32 = key.iter().map(|&k| items[k - 1]).sum();
                (*name, f64::from(sum) / key.len() as f64)
            })
            .collect();
        ScaleScore::new(self.name(), None, dims)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SusScore {
    pub total: f64,
    pub usability: f64,
    pub learnability: f64,
}

impl SusScore {
    /// Scores from per-item contributions (each 0–4).
    ///
    /// Learnability is items 4 and 10; usability the other eight.
    pub fn from_contributions(c: &[f64; 10]) -> Self {
        let sum: f64 = c.iter().sum();
        let learn = c[3] + c[9];
        SusScore {
            total: sum * 2.5,
            usability: (sum - learn) / 32.0 * 100.0,
            learnability: learn / 8.0 * 100.0,
        }
    }

    /// Odd items contribute `raw − 1`, even items `5 − raw`.
    pub fn contributions(items: &[i32]) -> [f64; 10] {
        let mut c = [0.0; 10];
        for (i, &v) in items.iter().take(10).enumerate() {
            c[i] = f64::from(if i % 2 == 0 { v - 1 } else { 5 - v });
        }
        c
    }
}

pub struct Sus;

impl Instrument for Sus {
    fn name(&self) -> &'static str {
        "sus"
    }
    fn item_count(&self) -> usize {
        10
    }
    fn response_range(&self) -> (i32, i32) {
        (1, 5)
    }
    fn score_checked(&self, items: &[i32]) -> ScaleScore {
        let s = SusScore::from_contributions(&SusScore::contributions(items));
        ScaleScore::new(
            self.name(),
            Some(s.total),
            vec![("usability", s.usability), ("learnability", s.learnability)],
        )
    }
}

/// Five 1–5 ratings of the NPC's emotional support; total 5–25.
pub struct Paesis;

impl Instrument for Paesis {
    fn name(&self) -> &'static str {
        "paesis"
    }
    fn item_count(&self) -> usize {
        5
    }
    fn response_range(&self) -> (i32, i32) {
        (1, 5)
    }
    fn score_checked(&self, items: &[i32]) -> ScaleScore {
        ScaleScore::new(self.name(), Some(f64::from(items.iter().sum::<i32>())), vec![])
    }
}

pub fn score_pss10(items: &[i32]) -> Result<f64> {
    Ok(Pss10.score(items)?.total.expect("pss10 has a total"))
}

pub fn score_cerq(items: &[i32]) -> Result<ScaleScore> {
    Cerq.score(items)
}

pub fn score_geq(items: &[i32]) -> Result<ScaleScore> {
    GeqCore.score(items)
}

pub fn score_sus(items: &[i32]) -> Result<SusScore> {
    Sus.check(items)?;
    Ok(SusScore::from_contributions(&SusScore::contributions(items)))
}

pub struct InstrumentRegistry {
    instruments: BTreeMap<&'static str, Box<dyn Instrument>>,
}

impl Default for InstrumentRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl InstrumentRegistry {
    pub fn empty() -> Self {
        InstrumentRegistry {
            instruments: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Pss10));
        r.register(Box::new(Cerq));
        r.register(Box::new(GeqCore));
        r.register(Box::new(Sus));
        r.register(Box::new(Paesis));
        r
    }

    pub fn register(&mut self, instrument: Box<dyn Instrument>) {
        self.instruments.insert(instrument.name(), instrument);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Instrument> {
        self.instruments
            .get(name)
            .map(Box::as_ref)
            .ok_or_else(|| StatsError::UnknownInstrument(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.instruments.keys().copied()
    }
}
