//! The structured NPC turn record and its strict parser.
//!
//! A provider reply is accepted only when every field of the turn record is
//! present, well-typed and inside its domain. Unknown extra fields are ignored.
//! One level of markdown code fencing and any prose around the JSON object is
//! stripped before parsing.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Maximum number of suggested replies carried by one turn.
pub const MAX_SUGGESTED_REPLIES: usize = 3;
/// Maximum length (in characters) of one suggested reply.
pub const MAX_SUGGESTED_REPLY_CHARS: usize = 200;

const FRAGMENT_LIMIT: usize = 240;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("provider output is not a structured record: {reason} (fragment: {fragment:?})")]
    MalformedDocument { reason: String, fragment: String },
    #[error("required field `{field}` is missing (fragment: {fragment:?})")]
    MissingField { field: String, fragment: String },
    #[error("field `{field}` has out-of-domain value {value} (fragment: {fragment:?})")]
    OutOfDomain {
        field: String,
        value: String,
        fragment: String,
    },
}

impl ContractError {
    /// The raw provider text (truncated) that caused the error.
    pub fn fragment(&self) -> &str {
        match self {
            ContractError::MalformedDocument { fragment, .. }
            | ContractError::MissingField { fragment, .. }
            | ContractError::OutOfDomain { fragment, .. } => fragment,
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            ContractError::MalformedDocument { .. } => None,
            ContractError::MissingField { field, .. } | ContractError::OutOfDomain { field, .. } => {
                Some(field)
            }
        }
    }
}

/// Binary safety gate. `Blocked` zeroes the round score and triggers safe mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum SafetyGate {
    Blocked,
    Open,
}

impl SafetyGate {
    pub fn as_u8(self) -> u8 {
        match self {
            SafetyGate::Blocked => 0,
            SafetyGate::Open => 1,
        }
    }

    pub fn is_open(self) -> bool {
        self == SafetyGate::Open
    }
}

impl From<SafetyGate> for u8 {
    fn from(g: SafetyGate) -> u8 {
        g.as_u8()
    }
}

impl TryFrom<u8> for SafetyGate {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(SafetyGate::Blocked),
            1 => Ok(SafetyGate::Open),
            other => Err(format!("safety gate must be 0 or 1, got {other}")),
        }
    }
}

/// Difficulty multiplier of the NPC's question: 0.8, 1.0 or 1.2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub enum Difficulty {
    Easy,
    Normal,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Normal, Difficulty::Hard];

    pub fn factor(self) -> f64 {
        match self {
            Difficulty::Easy => 0.8,
            Difficulty::Normal => 1.0,
            Difficulty::Hard => 1.2,
        }
    }

    pub fn from_factor(v: f64) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|d| (d.factor() - v).abs() <= 1e-9)
    }
}

impl From<Difficulty> for f64 {
    fn from(d: Difficulty) -> f64 {
        d.factor()
    }
}

impl TryFrom<f64> for Difficulty {
    type Error = String;

    fn try_from(v: f64) -> Result<Self, String> {
        Difficulty::from_factor(v).ok_or_else(|| format!("difficulty factor {v} not in {{0.8, 1.0, 1.2}}"))
    }
}

/// An integer rubric level in `0..=5` (cognitive restructuring, engagement, progress).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub struct RubricLevel(u8);

impl RubricLevel {
    pub const MAX: u8 = 5;

    pub fn new(v: u8) -> Option<Self> {
        (v <= Self::MAX).then_some(RubricLevel(v))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = RubricLevel> {
        (0..=Self::MAX).map(RubricLevel)
    }
}

impl From<RubricLevel> for u8 {
    fn from(l: RubricLevel) -> u8 {
        l.0
    }
}

impl TryFrom<u8> for RubricLevel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        RubricLevel::new(v).ok_or_else(|| format!("rubric level must be within 0..=5, got {v}"))
    }
}

/// Which built-in mini-game (if any) the NPC asks to start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiniGameCall {
    None,
    Breathing,
    Match3,
    FiveSenses,
}

impl MiniGameCall {
    pub fn as_str(self) -> &'static str {
        match self {
            MiniGameCall::None => "none",
            MiniGameCall::Breathing => "breathing",
            MiniGameCall::Match3 => "match3",
            MiniGameCall::FiveSenses => "five_senses",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(MiniGameCall::None),
            "breathing" => Some(MiniGameCall::Breathing),
            "match3" => Some(MiniGameCall::Match3),
            "five_senses" => Some(MiniGameCall::FiveSenses),
            _ => None,
        }
    }
}

impl fmt::Display for MiniGameCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One validated NPC dialogue round as returned by the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpcTurn {
    pub npc_reply: String,
    pub safety_gate: SafetyGate,
    pub difficulty_factor: Difficulty,
    pub penalty_score: u8,
    #[serde(rename = "Ct")]
    pub ct: RubricLevel,
    #[serde(rename = "Et")]
    pub et: RubricLevel,
    #[serde(rename = "Pt")]
    pub pt: RubricLevel,
    /// The score the model reports. Advisory only; see [`crate::score::reconcile_turn`].
    pub round_score: f64,
    pub mini_game_call: MiniGameCall,
    pub safe_mode: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suggested_replies: Vec<String>,
}

impl NpcTurn {
    /// Serializes to the single-object wire format.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("turn serialization is infallible")
    }
}

fn fragment_of(raw: &str) -> String {
    if raw.chars().count() <= FRAGMENT_LIMIT {
        raw.to_string()
    } else {
        let mut s: String = raw.chars().take(FRAGMENT_LIMIT).collect();
        s.push('…');
        s
    }
}

/// Removes one level of markdown fencing and any prose around the outermost
/// `{ ... }` object.
pub fn extract_record(raw: &str) -> Option<&str> {
    let mut body = raw.trim();
    if let Some(rest) = body.strip_prefix("```") {
        // drop the info string (e.g. "json") on the opening line
        let rest = match rest.find('\n') {
            Some(nl) => &rest[nl + 1..],
            None => rest,
        };
        body = match rest.rfind("```") {
            Some(end) => &rest[..end],
            None => rest,
        };
    }
    let start = body.find('{')?;
    let end = body.rfind('}')?;
    (end > start).then(|| &body[start..=end])
}

struct Fields<'a> {
    map: &'a Map<String, Value>,
    fragment: &'a str,
}

impl<'a> Fields<'a> {
    fn get(&self, name: &str) -> Result<&'a Value, ContractError> {
        match self.map.get(name) {
            Some(Value::Null) | None => Err(ContractError::MissingField {
                field: name.to_string(),
                fragment: self.fragment.to_string(),
            }),
            Some(v) => Ok(v),
        }
    }

    fn out_of_domain(&self, name: &str, value: &Value) -> ContractError {
        ContractError::OutOfDomain {
            field: name.to_string(),
            value: value.to_string(),
            fragment: self.fragment.to_string(),
        }
    }

    fn small_int(&self, name: &str, max: u8) -> Result<u8, ContractError> {
        let v = self.get(name)?;
        match v.as_u64() {
            Some(n) if n <= u64::from(max) => Ok(n as u8),
            _ => Err(self.out_of_domain(name, v)),
        }
    }

    fn number(&self, name: &str) -> Result<(f64, &'a Value), ContractError> {
        let v = self.get(name)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Ok((x, v)),
            _ => Err(self.out_of_domain(name, v)),
        }
    }
}

/// Parses and validates raw provider output into an [`NpcTurn`].
pub fn parse_npc_turn(raw: &str) -> Result<NpcTurn, ContractError> {
    let fragment = fragment_of(raw);
    let record = extract_record(raw).ok_or_else(|| ContractError::MalformedDocument {
        reason: "no JSON object found".into(),
        fragment: fragment.clone(),
    })?;
    let value: Value = serde_json::from_str(record).map_err(|e| ContractError::MalformedDocument {
        reason: e.to_string(),
        fragment: fragment.clone(),
    })?;
    let Value::Object(map) = &value else {
        return Err(ContractError::MalformedDocument {
            reason: "top-level value is not an object".into(),
            fragment,
        });
    };
    let f = Fields {
        map,
        fragment: &fragment,
    };

    let npc_reply = match f.get("npc_reply")? {
        Value::String(s) if !s.trim().is_empty() => s.clone(),
        other => return Err(f.out_of_domain("npc_reply", other)),
    };
    let safety_gate = SafetyGate::try_from(f.small_int("safety_gate", 1)?)
        .expect("range checked above");
    let (factor, raw_factor) = f.number("difficulty_factor")?;
    let difficulty_factor =
        Difficulty::from_factor(factor).ok_or_else(|| f.out_of_domain("difficulty_factor", raw_factor))?;
    let penalty_score = f.small_int("penalty_score", 1)?;
    let level = |name: &str| -> Result<RubricLevel, ContractError> {
        Ok(RubricLevel(f.small_int(name, RubricLevel::MAX)?))
    };
    let ct = level("Ct")?;
    let et = level("Et")?;
    let pt = level("Pt")?;
    let (round_score, raw_score) = f.number("round_score")?;
    if round_score < 0.0 {
        return Err(f.out_of_domain("round_score", raw_score));
    }
    let call_value = f.get("mini_game_call")?;
    let mini_game_call = call_value
        .as_str()
        .and_then(MiniGameCall::parse)
        .ok_or_else(|| f.out_of_domain("mini_game_call", call_value))?;
    let safe_mode = match f.get("safe_mode")? {
        Value::Bool(b) => *b,
        other => return Err(f.out_of_domain("safe_mode", other)),
    };
    let suggested_replies = match map.get("suggested_replies") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) if items.len() <= MAX_SUGGESTED_REPLIES => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                match item.as_str() {
                    Some(s) if s.chars().count() <= MAX_SUGGESTED_REPLY_CHARS => out.push(s.to_string()),
                    _ => return Err(f.out_of_domain("suggested_replies", item)),
                }
            }
            out
        }
        Some(other) => return Err(f.out_of_domain("suggested_replies", other)),
    };

    Ok(NpcTurn {
        npc_reply,
        safety_gate,
        difficulty_factor,
        penalty_score,
        ct,
        et,
        pt,
        round_score,
        mini_game_call,
        safe_mode,
        suggested_replies,
    })
}


#[cfg(test)]
mod tests {
    use super::fixtures::EXAMPLE_TURN;
    use super::*;

    fn with_field(field: &str, value: Value) -> String {
        let mut v: Value = serde_json::from_str(EXAMPLE_TURN).unwrap();
        v[field] = value;
        v.to_string()
    }

    #[test]
    fn parses_example_turn() {
        let turn = parse_npc_turn(EXAMPLE_TURN).unwrap();
        assert_eq!(turn.safety_gate, SafetyGate::Open);
        assert_eq!(turn.difficulty_factor, Difficulty::Normal);
        assert_eq!(turn.penalty_score, 1);
        assert_eq!((turn.ct.get(), turn.et.get(), turn.pt.get()), (5, 4, 4));
        assert_eq!(turn.round_score, 10.0);
        assert_eq!(turn.mini_game_call, MiniGameCall::None);
        assert!(!turn.safe_mode);
        assert!(turn.suggested_replies.is_empty());
    }

    #[test]
    fn strips_fences_and_labels() {
        let fenced = format!("```\n\nJSON\n{EXAMPLE_TURN}\n\n```");
        assert_eq!(parse_npc_turn(&fenced).unwrap(), parse_npc_turn(EXAMPLE_TURN).unwrap());
        let tagged = format!("```json\n{EXAMPLE_TURN}\n```");
        assert!(parse_npc_turn(&tagged).is_ok());
        let chatty = format!("Sure! Here is the record:\n{EXAMPLE_TURN}\nHope that helps.");
        assert!(parse_npc_turn(&chatty).is_ok());
    }

    #[test]
    fn rubric_level_out_of_domain() {
        let err = parse_npc_turn(&with_field("Ct", 7.into())).unwrap_err();
        match err {
            ContractError::OutOfDomain { field, value, .. } => {
                assert_eq!(field, "Ct");
                assert_eq!(value, "7");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn difficulty_not_snapped() {
        let err = parse_npc_turn(&with_field("difficulty_factor", 0.9.into())).unwrap_err();
        assert_eq!(err.field(), Some("difficulty_factor"));
        for ok in [0.8, 1.0, 1.2] {
            let v: Value = serde_json::json!(ok);
            assert!(parse_npc_turn(&with_field("difficulty_factor", v)).is_ok());
        }
    }

    #[test]
    fn missing_and_null_fields() {
        let mut v: Value = serde_json::from_str(EXAMPLE_TURN).unwrap();
        v.as_object_mut().unwrap().remove("Pt");
        let err = parse_npc_turn(&v.to_string()).unwrap_err();
        assert!(matches!(err, ContractError::MissingField { ref field, .. } if field == "Pt"));
        let err = parse_npc_turn(&with_field("safe_mode", Value::Null)).unwrap_err();
        assert!(matches!(err, ContractError::MissingField { .. }));
    }

    #[test]
    fn type_errors_are_domain_errors() {
        for (field, value) in [
            ("safety_gate", serde_json::json!(2)),
            ("safety_gate", serde_json::json!("1")),
            ("penalty_score", serde_json::json!(0.5)),
            ("Et", serde_json::json!(-1)),
            ("round_score", serde_json::json!(-3)),
            ("mini_game_call", serde_json::json!("tetris")),
            ("safe_mode", serde_json::json!("false")),
            ("npc_reply", serde_json::json!("   ")),
            ("suggested_replies", serde_json::json!(["a", "b", "c", "d"])),
            ("suggested_replies", serde_json::json!(["x".repeat(201)])),
        ] {
            let err = parse_npc_turn(&with_field(field, value)).unwrap_err();
            assert_eq!(err.field(), Some(field), "{err}");
        }
    }

    #[test]
    fn unknown_fields_ignored_and_extension_parsed() {
        let mut v: Value = serde_json::from_str(EXAMPLE_TURN).unwrap();
        v["Evaluation_t"] = 14.into();
        v["suggested_replies"] = serde_json::json!(["I could start tonight.", "I'm not sure."]);
        let turn = parse_npc_turn(&v.to_string()).unwrap();
        assert_eq!(turn.suggested_replies.len(), 2);
    }

    #[test]
    fn malformed_documents() {
        for raw in ["", "not json", "{\"npc_reply\": ", "[1,2,3]", "```\n```"] {
            let err = parse_npc_turn(raw).unwrap_err();
            assert!(matches!(err, ContractError::MalformedDocument { .. }), "{raw:?} -> {err:?}");
        }
    }

    #[test]
    fn fragment_is_truncated() {
        let raw = "x".repeat(5000);
        let err = parse_npc_turn(&raw).unwrap_err();
        assert!(err.fragment().chars().count() <= FRAGMENT_LIMIT + 1);
    }

    #[test]
    fn wire_names_match_record() {
        let json = parse_npc_turn(EXAMPLE_TURN).unwrap().to_json();
        let v: Value = serde_json::from_str(&json).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "Ct", "Et", "Pt", "difficulty_factor", "mini_game_call", "npc_reply",
                "penalty_score", "round_score", "safe_mode", "safety_gate"
            ]
        );
    }
}
