use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use super::prompts::{
    grounding_image_prompt, player_expression, render, scene_design_messages, scene_image_prompt, GROUNDING_EVAL,
    REPAIR_REMINDER,
};
use super::{
    AgentPurpose, ChatMessage, ChatProvider, ChatRequest, PromptBundle, ProviderError, RetryPolicy, Role, Sleeper,
    ThreadSleeper,
};
use crate::contract::{extract_record, parse_npc_turn, ContractError, NpcTurn};
use crate::minigames::{GroundingEvaluator, GroundingForm, MiniGameError};
use crate::session::{PlayerProfile, SceneSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("NPC reply violates the turn contract after one repair attempt: {0}")]
    Contract(#[from] ContractError),
}

/// A parsed NPC turn plus the raw text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct NpcReply {
    pub raw: String,
    pub turn: NpcTurn,
    /// True when the first reply was malformed and the repair request succeeded.
    pub repaired: bool,
}

#[derive(Deserialize)]
struct SceneRecord {
    #[serde(default)]
    name: String,
    #[serde(default)]
    description: String,
}

/// Retrying front door to a [`ChatProvider`] for all three agents.
#[derive(Clone)]
pub struct AgentGateway {
    provider: Arc<dyn ChatProvider>,
    retry: RetryPolicy,
    sleeper: Arc<dyn Sleeper>,
    temperature: f64,
}

impl AgentGateway {
    pub fn new(provider: Arc<dyn ChatProvider>, retry: RetryPolicy) -> Self {
        AgentGateway {
            provider,
            retry,
            sleeper: Arc::new(ThreadSleeper),
            temperature: 0.7,
        }
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn provider(&self) -> &Arc<dyn ChatProvider> {
        &self.provider
    }

    fn with_retry<T>(&self, mut call: impl FnMut() -> Result<T, ProviderError>) -> Result<T, ProviderError> {
        let mut attempt = 0;
        loop {
            match call() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.retry.max_retries => {
                    let delay = self.retry.sample_delay(attempt);
                    tracing::warn!(attempt, ?delay, error = %e, "provider call failed, retrying");
                    self.sleeper.sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn complete(&self, purpose: AgentPurpose, messages: Vec<ChatMessage>) -> Result<String, ProviderError> {
        let request = ChatRequest {
            purpose,
            messages,
            temperature: self.temperature,
        };
        self.with_retry(|| self.provider.complete(&request))
    }

    /// Scene design agent followed by the scene image agent.
    pub fn generate_scene(&self, profile: &PlayerProfile) -> Result<SceneSpec, ProviderError> {
        let raw = self.complete(AgentPurpose::SceneDesign, scene_design_messages(profile))?;
        let record: SceneRecord = extract_record(&raw)
            .and_then(|body| serde_json::from_str(body).ok())
            .ok_or(ProviderError::EmptyScene)?;
        if record.name.trim().is_empty() || record.description.trim().is_empty() {
            return Err(ProviderError::EmptyScene);
        }
        let image_ref = self.request_scene_image(&record.description)?;
        Ok(SceneSpec {
            name: record.name.trim().to_string(),
            description: record.description.trim().to_string(),
            image_ref,
        })
    }

    pub fn request_scene_image(&self, description: &str) -> Result<String, ProviderError> {
        if description.trim().is_empty() {
            return Err(ProviderError::Precondition("scene description is empty".into()));
        }
        let prompt = scene_image_prompt(description);
        self.with_retry(|| self.provider.generate_image(&prompt))
    }

    pub fn request_grounding_image(&self) -> Result<String, ProviderError> {
        let prompt = grounding_image_prompt();
        self.with_retry(|| self.provider.generate_image(&prompt))
    }

    /// One NPC turn. A malformed reply gets exactly one repair request.
    pub fn request_npc_turn(&self, bundle: &PromptBundle) -> Result<NpcReply, GatewayError> {
        let mut messages = bundle.messages();
        let raw = self.complete(AgentPurpose::Npc, messages.clone())?;
        match parse_npc_turn(&raw) {
            Ok(turn) => Ok(NpcReply {
                raw,
                turn,
                repaired: false,
            }),
            Err(first) => {
                tracing::warn!(error = %first, "NPC reply malformed, requesting repair");
                messages.push(ChatMessage::new(Role::Assistant, raw));
                messages.push(ChatMessage::new(Role::User, render(REPAIR_REMINDER, &[])));
                let raw = self.complete(AgentPurpose::Npc, messages)?;
                let turn = parse_npc_turn(&raw)?;
                Ok(NpcReply {
                    raw,
                    turn,
                    repaired: true,
                })
            }
        }
    }
}

/// Grounding quality judged by the chat model.
pub struct AgentGroundingEvaluator {
    gateway: AgentGateway,
}

impl AgentGroundingEvaluator {
    pub fn new(gateway: AgentGateway) -> Self {
        AgentGroundingEvaluator { gateway }
    }
}

#[derive(Deserialize)]
struct QualityRecord {
    quality: f64,
}

impl GroundingEvaluator for AgentGroundingEvaluator {
    fn quality(&self, form: &GroundingForm) -> Result<f64, MiniGameError> {
        let answers = serde_json::json!({
            "see": form.see, "touch": form.touch, "hear": form.hear, "smell": form.smell, "taste": form.taste,
        });
        let messages = vec![
            ChatMessage::new(Role::System, render(GROUNDING_EVAL, &[])),
            ChatMessage::new(Role::User, player_expression(&answers.to_string())),
        ];
        let raw = self
            .gateway
            .complete(AgentPurpose::GroundingEvaluation, messages)
            .map_err(|e| MiniGameError::Evaluator(e.to_string()))?;
        let record: QualityRecord = extract_record(&raw)
            .and_then(|body| serde_json::from_str(body).ok())
            .ok_or_else(|| MiniGameError::Evaluator("grounding evaluator reply has no quality".into()))?;
        if !record.quality.is_finite() {
            return Err(MiniGameError::Evaluator("grounding quality is not finite".into()));
        }
        Ok(record.quality.clamp(0.0, 5.0))
    }
}
