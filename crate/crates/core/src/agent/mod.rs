//! The three cooperating agents (scene design, scene image, NPC) and the
//! chat-completion providers behind them.
//!
//! Providers are [`ChatProvider`] trait objects looked up by name in a
//! [`ProviderRegistry`]; `http` talks to an OpenAI-compatible endpoint and
//! `scripted` replays fixtures offline.

mod gateway;
mod http;
mod prompts;
mod retry;
mod scripted;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gateway::{AgentGateway, AgentGroundingEvaluator, GatewayError, NpcReply};
pub use http::HttpProvider;
pub use prompts::{
    build_npc_system_prompt, grounding_image_prompt, scene_image_prompt, PromptBundle, TEMPLATE_VERSION,
};
pub use retry::{RecordingSleeper, RetryPolicy, Sleeper, ThreadSleeper};
pub use scripted::{scene_fixture_for, ScriptStep, ScriptedProvider};

pub const DEFAULT_API_KEY_ENV: &str = "REVERIE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

/// Which agent a request comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentPurpose {
    SceneDesign,
    Npc,
    GroundingEvaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub purpose: AgentPurpose,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("provider request timed out")]
    Timeout,
    #[error("provider response could not be read: {0}")]
    BadResponse(String),
    #[error("scene agent returned no usable scene")]
    EmptyScene,
    #[error("scripted provider has no fixtures left (call {0})")]
    ScriptExhausted(usize),
    #[error("API key environment variable `{0}` is not set")]
    MissingApiKey(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unknown provider `{0}`")]
    UnknownProvider(String),
    #[error("provider configuration invalid: {0}")]
    Config(String),
}

impl ProviderError {
    /// Transport failures, timeouts, 429 and 5xx are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport(_) | ProviderError::Timeout => true,
            ProviderError::Status { status, .. } => *status == 429 || (500..600).contains(status),
            _ => false,
        }
    }
}

/// A chat-completion backend. Implementations are stateless, shareable handles.
pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Returns the first choice's message content.
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError>;

    /// Returns an opaque image reference for `prompt`.
    fn generate_image(&self, prompt: &str) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// Registry name of the provider (`http` or `scripted`).
    pub kind: String,
    pub base_url: String,
    pub model: String,
    pub image_model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub temperature: f64,
    /// Fixture file for the scripted provider.
    pub script_path: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: "http".into(),
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-5.2".into(),
            image_model: "gpt-image-1".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_s: 60.0,
            max_retries: 3,
            temperature: 0.7,
            script_path: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(ProviderError::Config(format!("timeout must be positive, got {}", self.timeout_s)));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s)
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            ..RetryPolicy::default()
        }
    }
}

type ProviderFactory = Box<dyn Fn(&ProviderConfig) -> Result<Arc<dyn ChatProvider>, ProviderError> + Send + Sync>;

/// Name → provider constructor.
pub struct ProviderRegistry {
    factories: BTreeMap<String, ProviderFactory>,
}

impl Default for ProviderRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ProviderRegistry {
    pub fn empty() -> Self {
        ProviderRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("http", |cfg| Ok(Arc::new(HttpProvider::from_config(cfg)?) as Arc<dyn ChatProvider>));
        r.register("scripted", |cfg| {
            let provider = match &cfg.script_path {
                Some(path) => ScriptedProvider::from_file(path)?,
                None => ScriptedProvider::new(Vec::new()),
            };
            Ok(Arc::new(provider) as Arc<dyn ChatProvider>)
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&ProviderConfig) -> Result<Arc<dyn ChatProvider>, ProviderError> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, config: &ProviderConfig) -> Result<Arc<dyn ChatProvider>, ProviderError> {
        config.validate()?;
        let factory = self
            .factories
            .get(&config.kind)
            .ok_or_else(|| ProviderError::UnknownProvider(config.kind.clone()))?;
        factory(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retryable_classification() {
        assert!(ProviderError::Timeout.is_retryable());
        assert!(ProviderError::Transport("reset".into()).is_retryable());
        assert!(ProviderError::Status { status: 429, body: String::new() }.is_retryable());
        assert!(ProviderError::Status { status: 503, body: String::new() }.is_retryable());
        assert!(!ProviderError::Status { status: 401, body: String::new() }.is_retryable());
        assert!(!ProviderError::ScriptExhausted(3).is_retryable());
    }

    #[test]
    fn registry_builds_by_name() {
        let r = ProviderRegistry::builtin();
        assert_eq!(r.names().collect::<Vec<_>>(), ["http", "scripted"]);
        let cfg = ProviderConfig {
            kind: "scripted".into(),
            ..Default::default()
        };
        assert_eq!(r.build(&cfg).unwrap().name(), "scripted");
        let cfg = ProviderConfig {
            kind: "carrier-pigeon".into(),
            ..Default::default()
        };
        assert!(matches!(r.build(&cfg), Err(ProviderError::UnknownProvider(_))));
    }

    #[test]
    fn config_validation() {
        let bad = ProviderConfig {
            timeout_s: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(ProviderConfig::default().validate().is_ok());
    }
}
