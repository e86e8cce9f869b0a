//! Service configuration, read from a TOML file.
//!
//! ```toml
//! [provider]
//! base_url = "https://api.openai.com/v1"
//! model = "gpt-5.2"
//! api_key_env = "REVERIE_API_KEY"
//! timeout_s = 60
//! max_retries = 3
//!
//! [engine]
//! pass_threshold = 100
//! cooldown_rounds = 5
//! data_dir = "data"
//!
//! [safety]
//! lexicon_path = "risk_lexicon.txt"   # optional; a built-in list is used otherwise
//!
//! [server]
//! bind = "127.0.0.1:8080"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use reverie_core::agent::ProviderConfig;
use reverie_core::{EngineConfig, RiskLexicon};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineSection {
    pub pass_threshold: f64,
    pub cooldown_rounds: u32,
    pub data_dir: PathBuf,
}

impl Default for EngineSection {
    fn default() -> Self {
        let e = EngineConfig::default();
        EngineSection {
            pass_threshold: e.pass_threshold,
            cooldown_rounds: e.cooldown_rounds,
            data_dir: PathBuf::from("data"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetySection {
    pub lexicon_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerSection {
    pub bind: String,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection {
            bind: "127.0.0.1:8080".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub provider: ProviderConfig,
    pub engine: EngineSection,
    pub safety: SafetySection,
    pub server: ServerSection,
}

impl ServiceConfig {
    /// Parses and validates; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ServiceConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
        cfg.engine.data_dir = resolve(&cfg.engine.data_dir);
        cfg.safety.lexicon_path = cfg.safety.lexicon_path.as_deref().map(resolve);
        cfg.provider.script_path = cfg.provider.script_path.as_deref().map(resolve);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.engine_config()
            .validate()
            .map_err(|e| anyhow::anyhow!("engine: {e}"))?;
        self.provider.validate().map_err(|e| anyhow::anyhow!("provider: {e}"))?;
        if let Some(p) = &self.safety.lexicon_path {
            if !p.is_file() {
                bail!("safety.lexicon_path {} is not a readable file", p.display());
            }
        }
        Ok(())
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            pass_threshold: self.engine.pass_threshold,
            cooldown_rounds: self.engine.cooldown_rounds,
        }
    }

    pub fn lexicon(&self) -> anyhow::Result<RiskLexicon> {
        match &self.safety.lexicon_path {
            Some(p) => RiskLexicon::load(p).with_context(|| format!("reading lexicon {}", p.display())),
            None => Ok(RiskLexicon::default()),
        }
    }
}
