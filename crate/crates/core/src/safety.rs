//! Local high-risk phrase screen applied before the provider's own verdict.

use std::path::Path;

const DEFAULT_LEXICON: &str = include_str!("../prompts/risk_lexicon.txt");

/// Case-insensitive phrase list. Either a lexicon hit or a blocked safety
/// gate from the provider sends the session into safe mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskLexicon {
    phrases: Vec<String>,
}

impl Default for RiskLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_LEXICON)
    }
}

impl RiskLexicon {
    pub fn new<I, S>(phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let phrases = phrases
            .into_iter()
            .map(|p| p.as_ref().trim().to_lowercase())
            .filter(|p| !p.is_empty())
            .collect();
        RiskLexicon { phrases }
    }

    /// One phrase per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Self::new(text.lines().filter(|l| !l.trim_start().starts_with('#')))
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    /// The first lexicon phrase found in `text`, if any.
    pub fn screen(&self, text: &str) -> Option<&str> {
        let lowered = text.to_lowercase();
        self.phrases
            .iter()
            .find(|p| lowered.contains(p.as_str()))
            .map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lexicon_loads() {
        let lex = RiskLexicon::default();
        assert!(!lex.is_empty());
        assert!(lex.phrases().iter().all(|p| !p.starts_with('#')));
    }

    #[test]
    fn matching_is_case_insensitive() {
        let lex = RiskLexicon::new(["Want to die"]);
        assert_eq!(lex.screen("Sometimes I WANT TO DIE."), Some("want to die"));
        assert_eq!(lex.screen("I want to dine out"), None);
    }

    #[test]
    fn empty_lexicon_never_fires() {
        assert_eq!(RiskLexicon::new(Vec::<String>::new()).screen("suicide"), None);
    }
}
