//! Declarative run configuration (TOML).
//!
//! Relative paths (workspace, template files, replay fixtures, file-kind
//! systems) are resolved against the directory holding the config file.
//! Credentials are never read from the file itself, only the names of the
//! environment variables that hold them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{CachedEmbedder, DetectorConfig, Embedder, HttpEmbedder, MatchMode, MockEmbedder};
use crate::generation::{derive_seed, templates, ChatProvider, LlmProvider, ProviderError, ReplayProvider, Sampling};
use crate::metrics::ResampleConfig;
use crate::model::{validate_properties, DetectorKind, LanguagePair, ModelError, PropertySpec};
use crate::runner::{AdapterKind, SystemAdapter};
use crate::text::TokenizerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

fn default_target() -> usize {
    1000
}

fn default_workspace() -> PathBuf {
    PathBuf::from("workspace")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsSection {
    pub k: usize,
    pub alpha: f64,
}

impl Default for StatsSection {
    fn default() -> Self {
        let d = ResampleConfig::default();
        Self { k: d.k, alpha: d.alpha }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSection {
    pub match_mode: MatchMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmKind {
    Chat,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSection {
    pub kind: LlmKind,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Fixture directory for `replay`.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderSection {
    pub kind: EmbedderKind,
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProvidersSection {
    #[serde(default)]
    pub llm: Option<LlmSection>,
    #[serde(default)]
    pub embedder: Option<EmbedderSection>,
}

/// A property as written in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyEntry {
    pub id: String,
    pub name: String,
    pub detector: DetectorKind,
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub demos: Vec<String>,
    /// Inline template text; the `*_file` variants take precedence.
    #[serde(default)]
    pub source_prompt: Option<String>,
    #[serde(default)]
    pub source_prompt_file: Option<PathBuf>,
    #[serde(default)]
    pub candidate_prompt: Option<String>,
    #[serde(default)]
    pub candidate_prompt_file: Option<PathBuf>,
    #[serde(default)]
    pub foil_prompt: Option<String>,
    #[serde(default)]
    pub foil_prompt_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileConfig {
    #[serde(default = "default_workspace")]
    pub workspace: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_target")]
    pub target_count: usize,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default)]
    pub tokenizer: TokenizerConfig,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub providers: ProvidersSection,
    #[serde(default)]
    pub properties: Vec<PropertyEntry>,
    #[serde(default)]
    pub systems: Vec<SystemAdapter>,
}

/// Loaded configuration with templates read and paths resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub base_dir: PathBuf,
    pub workspace: PathBuf,
    pub seed: u64,
    pub target_count: usize,
    pub stats: StatsSection,
    pub tokenizer: TokenizerConfig,
    pub detector: DetectorConfig,
    pub sampling: Sampling,
    pub providers: ProvidersSection,
    pub properties: Vec<PropertySpec>,
    pub systems: Vec<SystemAdapter>,
    pub offline: bool,
}

fn read_text(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn template(base: &Path, inline: &Option<String>, file: &Option<PathBuf>) -> Result<Option<String>, ConfigError> {
    match (file, inline) {
        (Some(f), _) => read_text(&base.join(f)).map(Some),
        (None, Some(t)) => Ok(Some(t.clone())),
        (None, None) => Ok(None),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read_text(path)?;
        let file: FileConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Self::from_file(file, &base)
    }

    pub fn from_file(file: FileConfig, base: &Path) -> Result<Self, ConfigError> {
        let mut properties = Vec::with_capacity(file.properties.len());
        for p in &file.properties {
            let candidate_prompt = template(base, &p.candidate_prompt, &p.candidate_prompt_file)?
                .ok_or_else(|| ConfigError::Invalid(format!("property {}: no candidate prompt", p.id)))?;
            let spec = PropertySpec {
                id: p.id.clone(),
                name: p.name.clone(),
                detector: p.detector,
                source_prompt: template(base, &p.source_prompt, &p.source_prompt_file)?
                    .unwrap_or_else(|| templates::SOURCE_SENTENCES.to_string()),
                candidate_prompt,
                foil_prompt: template(base, &p.foil_prompt, &p.foil_prompt_file)?,
                demos: p.demos.clone(),
                language_pair: LanguagePair::new(&p.source, &p.target),
            };
            properties.push(spec);
        }
        validate_properties(&properties)?;
        let mut seen = std::collections::HashSet::new();
        for s in &file.systems {
            s.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if !seen.insert(s.system_id.as_str()) {
                return Err(ConfigError::Invalid(format!("system {} is listed twice", s.system_id)));
            }
        }
        Ok(Self {
            base_dir: base.to_path_buf(),
            workspace: base.join(&file.workspace),
            seed: file.seed,
            target_count: file.target_count,
            stats: file.stats,
            tokenizer: file.tokenizer,
            detector: DetectorConfig {
                match_mode: file.detector.match_mode,
                tokenizer: file.tokenizer,
            },
            sampling: file.sampling,
            providers: file.providers,
            properties,
            systems: file.systems,
            offline: false,
        })
    }

    /// Bootstrap settings; the resampling seed is derived from the run seed.
    pub fn resample(&self) -> ResampleConfig {
        ResampleConfig {
            k: self.stats.k,
            alpha: self.stats.alpha,
            seed: derive_seed(self.seed, "bootstrap"),
        }
    }

    pub fn property(&self, id: &str) -> Option<&PropertySpec> {
        self.properties.iter().find(|p| p.id == id)
    }

    /// Selected properties; all when `ids` is empty.
    pub fn select_properties(&self, ids: &[String]) -> Result<Vec<&PropertySpec>, ConfigError> {
        if ids.is_empty() {
            return Ok(self.properties.iter().collect());
        }
        ids.iter()
            .map(|id| {
                self.property(id)
                    .ok_or_else(|| ConfigError::Invalid(format!("unknown property id {id:?}")))
            })
            .collect()
    }

    pub fn select_systems(&self, ids: &[String]) -> Result<Vec<&SystemAdapter>, ConfigError> {
        if ids.is_empty() {
            return Ok(self.systems.iter().collect());
        }
        ids.iter()
            .map(|id| {
                self.systems
                    .iter()
                    .find(|s| s.system_id == *id)
                    .ok_or_else(|| ConfigError::Invalid(format!("unknown system id {id:?}")))
            })
            .collect()
    }

    pub fn property_dir(&self, id: &str) -> PathBuf {
        self.workspace.join(id)
    }

    fn env_key(var: &Option<String>) -> Option<String> {
        var.as_ref().and_then(|v| std::env::var(v).ok())
    }

    pub fn llm(&self) -> Result<Box<dyn LlmProvider>, ConfigError> {
        let llm = self
            .providers
            .llm
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("no [providers.llm] section".into()))?;
        let id = llm.id.clone().unwrap_or_else(|| match llm.kind {
            LlmKind::Chat => "chat".into(),
            LlmKind::Replay => "replay".into(),
        });
        match llm.kind {
            LlmKind::Chat => {
                if self.offline {
                    return Err(ConfigError::Invalid("--offline forbids the chat LLM provider".into()));
                }
                let url = llm
                    .url
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("chat LLM provider needs `url`".into()))?;
                let model = llm
                    .model
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("chat LLM provider needs `model`".into()))?;
                Ok(Box::new(
                    ChatProvider::new(id, url, model).with_api_key(Self::env_key(&llm.api_key_env)),
                ))
            }
            LlmKind::Replay => {
                let dir = llm
                    .dir
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("replay LLM provider needs `dir`".into()))?;
                Ok(Box::new(ReplayProvider::from_dir(id, &self.base_dir.join(dir))?))
            }
        }
    }

    pub fn embedder(&self) -> Result<Box<dyn Embedder>, ConfigError> {
        let e = self
            .providers
            .embedder
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("no [providers.embedder] section".into()))?;
        match e.kind {
            EmbedderKind::Mock => Ok(Box::new(MockEmbedder::new(e.dim.unwrap_or(64)))),
            EmbedderKind::Http => {
                if self.offline {
                    return Err(ConfigError::Invalid("--offline forbids the http embedder".into()));
                }
                let url = e
                    .url
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("http embedder needs `url`".into()))?;
                Ok(Box::new(CachedEmbedder::new(
                    HttpEmbedder::new(url).with_api_key(Self::env_key(&e.api_key_env)),
                )))
            }
        }
    }

    /// Refuses network-backed systems when offline.
    pub fn check_system_allowed(&self, s: &SystemAdapter) -> Result<(), ConfigError> {
        if self.offline && s.kind == AdapterKind::Http {
            return Err(ConfigError::Invalid(format!(
                "--offline forbids http system {}",
                s.system_id
            )));
        }
        Ok(())
    }
}
