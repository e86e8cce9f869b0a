//! Offline provider that replays fixtures in order.
//!
//! NPC and grounding requests consume the script. Scene-design requests are
//! answered from a small built-in fixture set keyed by a hash of the profile,
//! and images resolve to `placeholder:<hash>`.

use std::path::Path;
use std::sync::Mutex;

use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{AgentPurpose, ChatProvider, ChatRequest, ProviderError};
use crate::session::PlayerProfile;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptStep {
    Reply(String),
    Fail(ProviderError),
}

impl ScriptStep {
    /// Fixture file element: a string is a raw reply; `{"error": "timeout" |
    /// "transport" | <status code>}` is a failure; any other object is
    /// serialized and used as the reply.
    pub fn from_json(v: &Value) -> Result<Self, ProviderError> {
        match v {
            Value::String(s) => Ok(ScriptStep::Reply(s.clone())),
            Value::Object(map) => match map.get("error") {
                None => Ok(ScriptStep::Reply(v.to_string())),
                Some(Value::String(s)) if s == "timeout" => Ok(ScriptStep::Fail(ProviderError::Timeout)),
                Some(Value::String(s)) if s == "transport" => {
                    Ok(ScriptStep::Fail(ProviderError::Transport("scripted transport failure".into())))
                }
                Some(Value::Number(n)) => Ok(ScriptStep::Fail(ProviderError::Status {
                    status: n.as_u64().unwrap_or(500) as u16,
                    body: "scripted status".into(),
                })),
                Some(other) => Err(ProviderError::Config(format!("unknown scripted error {other}"))),
            },
            other => Err(ProviderError::Config(format!("unsupported fixture element {other}"))),
        }
    }
}

pub struct ScriptedProvider {
    script: Vec<ScriptStep>,
    cursor: Mutex<usize>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedProvider {
    pub fn new(script: Vec<ScriptStep>) -> Self {
        ScriptedProvider {
            script,
            cursor: Mutex::new(0),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn replies<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(replies.into_iter().map(|r| ScriptStep::Reply(r.into())).collect())
    }

    /// Loads a JSON array of fixtures.
    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ProviderError> {
        let v: Value = serde_json::from_str(text).map_err(|e| ProviderError::Config(format!("fixture file: {e}")))?;
        let Value::Array(items) = v else {
            return Err(ProviderError::Config("fixture file must hold a JSON array".into()));
        };
        Ok(Self::new(items.iter().map(ScriptStep::from_json).collect::<Result<_, _>>()?))
    }

    /// Every request seen so far, including scene requests.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().expect("request log").clone()
    }

    pub fn remaining(&self) -> usize {
        self.script.len() - *self.cursor.lock().expect("cursor")
    }
}

fn hash_hex(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

const SCENES: [(&str, &str); 4] = [
    (
        "Lantern Lake at Dusk",
        "You stand on a wooden pier above a still lake while paper lanterns drift across the water.",
    ),
    (
        "The Cloud Library",
        "You sit in a quiet library whose tall windows open onto slow-moving clouds and warm afternoon light.",
    ),
    (
        "Moss Garden Path",
        "You walk a soft mossy path through a garden where a small stream hums between smooth stones.",
    ),
    (
        "Rooftop of Small Stars",
        "You rest on a calm rooftop under a sky of tiny, friendly stars, a blanket around your shoulders.",
    ),
];

/// Deterministic scene record (as JSON) for a profile.
pub fn scene_fixture_for(profile: &PlayerProfile) -> String {
    let key = serde_json::to_string(profile).expect("profile serializes");
    let digest = Sha256::digest(key.as_bytes());
    let (name, base) = SCENES[digest[0] as usize % SCENES.len()];
    let identity = match profile.identity.trim() {
        "" => "everyday life",
        s => s,
    };
    let description = format!(
        "{base} The pressures of {} life feel far away here, and there is room to set them down for a while.",
        identity.to_lowercase()
    );
    serde_json::json!({ "name": name, "description": description }).to_string()
}

fn profile_from_request(request: &ChatRequest) -> Option<PlayerProfile> {
    request.messages.iter().rev().find_map(|m| {
        let body = m.content.strip_prefix("[PLAYER PROFILE]")?;
        serde_json::from_str(body.trim()).ok()
    })
}

impl ChatProvider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        self.requests.lock().expect("request log").push(request.clone());
        if request.purpose == AgentPurpose::SceneDesign {
            let profile = profile_from_request(request)
                .ok_or_else(|| ProviderError::BadResponse("scene request carries no profile".into()))?;
            return Ok(scene_fixture_for(&profile));
        }
        let mut cursor = self.cursor.lock().expect("cursor");
        let step = self
            .script
            .get(*cursor)
            .cloned()
            .ok_or(ProviderError::ScriptExhausted(*cursor + 1))?;
        *cursor += 1;
        match step {
            ScriptStep::Reply(r) => Ok(r),
            ScriptStep::Fail(e) => Err(e),
        }
    }

    fn generate_image(&self, prompt: &str) -> Result<String, ProviderError> {
        Ok(format!("placeholder:{}", hash_hex(prompt)))
    }
}
