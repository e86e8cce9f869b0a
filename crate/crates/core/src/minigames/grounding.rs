//! Five-senses (5-4-3-2-1) grounding: name five things seen, four touched,
//! three heard, two smelled and one tasted.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{GameContext, GameKind, MiniGame, MiniGameError, MiniGameEvent, MiniGameResult, MiniGameState, Progress};
use crate::safety::RiskLexicon;

pub const SLOT_COUNTS: [(&str, usize); 5] = [("see", 5), ("touch", 4), ("hear", 3), ("smell", 2), ("taste", 1)];
pub const TOTAL_SLOTS: usize = 15;
pub const MAX_QUALITY: f64 = 5.0;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingForm {
    pub see: Vec<String>,
    pub touch: Vec<String>,
    pub hear: Vec<String>,
    pub smell: Vec<String>,
    pub taste: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
}

impl GroundingForm {
    fn groups(&self) -> [&Vec<String>; 5] {
        [&self.see, &self.touch, &self.hear, &self.smell, &self.taste]
    }

    pub fn answers(&self) -> impl Iterator<Item = &str> {
        self.groups().into_iter().flatten().map(String::as_str)
    }

    /// Checks the exact 5/4/3/2/1 shape with no blank answers.
    pub fn validate(&self) -> Result<(), MiniGameError> {
        for ((name, want), got) in SLOT_COUNTS.iter().zip(self.groups()) {
            if got.len() != *want {
                return Err(MiniGameError::IncompleteForm(format!(
                    "`{name}` needs {want} items, got {}",
                    got.len()
                )));
            }
            if got.iter().any(|s| s.trim().is_empty()) {
                return Err(MiniGameError::IncompleteForm(format!("`{name}` has a blank item")));
            }
        }
        Ok(())
    }

    /// Number of pairwise-distinct answers after trimming and case folding.
    pub fn distinct_answers(&self) -> usize {
        self.answers()
            .map(|a| a.trim().to_lowercase())
            .filter(|a| !a.is_empty())
            .collect::<HashSet<_>>()
            .len()
    }
}

/// Scores a submitted form on a 0–5 quality scale.
pub trait GroundingEvaluator: Send + Sync {
    fn quality(&self, form: &GroundingForm) -> Result<f64, MiniGameError>;
}

/// Distinct answers × 5/15.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineGroundingEvaluator;

impl GroundingEvaluator for OfflineGroundingEvaluator {
    fn quality(&self, form: &GroundingForm) -> Result<f64, MiniGameError> {
        Ok(form.distinct_answers() as f64 * (MAX_QUALITY / TOTAL_SLOTS as f64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundingOutcome {
    Scored(MiniGameResult),
    /// An answer matched the risk lexicon.
    Escalate { phrase: String },
}

/// Validates, screens and scores a grounding form.
pub fn grounding_evaluate(
    form: &GroundingForm,
    evaluator: &dyn GroundingEvaluator,
    lexicon: &RiskLexicon,
) -> Result<GroundingOutcome, MiniGameError> {
    form.validate()?;
    if let Some(phrase) = form.answers().find_map(|a| lexicon.screen(a)) {
        return Ok(GroundingOutcome::Escalate {
            phrase: phrase.to_string(),
        });
    }
    let q = evaluator.quality(form)?.clamp(0.0, MAX_QUALITY);
    Ok(GroundingOutcome::Scored(MiniGameResult::completed(GameKind::FiveSenses, q)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingState {
    /// Illustration shown beside the form; deliberately unrelated to the stressor.
    pub image_ref: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GroundingGame;

impl MiniGame for GroundingGame {
    fn kind(&self) -> GameKind {
        GameKind::FiveSenses
    }

    fn start(&self, seed: u64) -> MiniGameState {
        MiniGameState::FiveSenses(GroundingState {
            image_ref: format!("placeholder:grounding-{:016x}", seed),
        })
    }

    fn handle(
        &self,
        state: &mut MiniGameState,
        event: &MiniGameEvent,
        ctx: &GameContext<'_>,
    ) -> Result<Progress, MiniGameError> {
        if state.kind() != GameKind::FiveSenses {
            return Err(MiniGameError::GameMismatch {
                active: state.kind(),
                got: GameKind::FiveSenses,
            });
        }
        match event {
            MiniGameEvent::Submit { form } => Ok(match grounding_evaluate(form, ctx.grounding, ctx.lexicon)? {
                GroundingOutcome::Scored(r) => Progress::Finished(r),
                GroundingOutcome::Escalate { phrase } => Progress::Escalate { phrase },
            }),
            MiniGameEvent::Abandon | MiniGameEvent::Finish => {
                Ok(Progress::Finished(MiniGameResult::abandoned(GameKind::FiveSenses)))
            }
            other => Err(MiniGameError::UnsupportedEvent {
                game: GameKind::FiveSenses,
                event: other.name().into(),
            }),
        }
    }
}

#[cfg(test)]
pub(crate) fn sample_form() -> GroundingForm {
    let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
    GroundingForm {
        see: v(&["lamp", "window", "cup", "book", "plant"]),
        touch: v(&["desk", "sleeve", "pen", "keyboard"]),
        hear: v(&["fan", "traffic", "birds"]),
        smell: v(&["coffee", "soap"]),
        taste: v(&["mint"]),
        image_ref: None,
    }
}
