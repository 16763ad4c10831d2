//! MT system adapters: an HTTP service, a local command speaking
//! line-per-sentence over stdin/stdout, or a file of precomputed
//! translations.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::embed::InFlight;
use crate::http::{HttpError, JsonClient, RetryPolicy};
use crate::jsonl::{self, JsonlError};
use crate::model::LanguagePair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdapterError {
    #[error("system {system}: {source}")]
    Http {
        system: String,
        #[source]
        source: HttpError,
    },
    #[error("system {system}: command failed: {message}")]
    Command { system: String, message: String },
    #[error("system {system}: expected {expected} translations, got {got}")]
    CountMismatch {
        system: String,
        expected: usize,
        got: usize,
    },
    #[error("system {system}: no translation for case {case_id}")]
    MissingTranslation { system: String, case_id: String },
    #[error("system {system}: {message}")]
    Io { system: String, message: String },
    #[error("system {0}: adapter configuration is incomplete: {1}")]
    Config(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    Http,
    Command,
    File,
}

fn default_batch_size() -> usize {
    32
}

fn default_in_flight() -> usize {
    4
}

/// Declarative description of one MT system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemAdapter {
    pub system_id: String,
    pub kind: AdapterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Program and arguments.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub command: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Environment variable holding a bearer token for `http` systems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    pub language_pair: LanguagePair,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

impl SystemAdapter {
    pub fn validate(&self) -> Result<(), AdapterError> {
        let missing = |what: &str| Err(AdapterError::Config(self.system_id.clone(), what.into()));
        if self.system_id.trim().is_empty() {
            return missing("system_id is empty");
        }
        match self.kind {
            AdapterKind::Http if self.endpoint.is_none() => missing("http system needs `endpoint`"),
            AdapterKind::Command if self.command.is_empty() => missing("command system needs `command`"),
            AdapterKind::File if self.path.is_none() => missing("file system needs `path`"),
            _ if self.batch_size == 0 => missing("batch_size must be at least 1"),
            _ => Ok(()),
        }
    }

    /// Builds the adapter. File paths are resolved against `base`.
    pub fn build(&self, base: &Path, retry: RetryPolicy) -> Result<Box<dyn Translator>, AdapterError> {
        self.validate()?;
        Ok(match self.kind {
            AdapterKind::Http => Box::new(HttpTranslator {
                system: self.system_id.clone(),
                url: self.endpoint.clone().unwrap_or_default(),
                api_key: self.api_key_env.as_ref().and_then(|v| std::env::var(v).ok()),
                pair: self.language_pair.clone(),
                batch_size: self.batch_size,
                in_flight: InFlight::new(self.max_in_flight),
                client: JsonClient::default(),
                retry,
            }),
            AdapterKind::Command => Box::new(CommandTranslator {
                system: self.system_id.clone(),
                argv: self.command.clone(),
            }),
            AdapterKind::File => {
                let path = base.join(self.path.as_ref().expect("validated"));
                Box::new(FileTranslator::load(&self.system_id, &path)?)
            }
        })
    }
}

/// One source sentence to translate.
#[derive(Debug, Clone, Copy)]
pub struct SourceItem<'a> {
    pub case_id: &'a str,
    pub source: &'a str,
}

pub trait Translator: Send + Sync {
    fn system_id(&self) -> &str;

    /// Whether outputs depend only on the source text (and may be cached).
    fn cacheable(&self) -> bool {
        true
    }

    /// One result per item, in input order.
    fn translate(&self, items: &[SourceItem<'_>]) -> Vec<Result<String, AdapterError>>;
}

struct HttpTranslator {
    system: String,
    url: String,
    api_key: Option<String>,
    pair: LanguagePair,
    batch_size: usize,
    in_flight: InFlight,
    client: JsonClient,
    retry: RetryPolicy,
}

#[derive(Serialize)]
struct MtRequest<'a> {
    texts: Vec<&'a str>,
    src: &'a str,
    tgt: &'a str,
}

#[derive(Deserialize)]
struct MtResponse {
    translations: Vec<String>,
}

impl HttpTranslator {
    fn batch(&self, items: &[SourceItem<'_>]) -> Result<Vec<String>, AdapterError> {
        let body = MtRequest {
            texts: items.iter().map(|i| i.source).collect(),
            src: &self.pair.source,
            tgt: &self.pair.target,
        };
        let headers: Vec<(&str, String)> = self
            .api_key
            .iter()
            .map(|k| ("Authorization", format!("Bearer {k}")))
            .collect();
        let resp: MtResponse = self
            .in_flight
            .run(|| {
                self.retry.run(
                    |_| self.client.post(&self.url, &headers, &body),
                    HttpError::is_retryable,
                )
            })
            .map_err(|source| AdapterError::Http {
                system: self.system.clone(),
                source,
            })?;
        if resp.translations.len() != items.len() {
            return Err(AdapterError::CountMismatch {
                system: self.system.clone(),
                expected: items.len(),
                got: resp.translations.len(),
            });
        }
        Ok(resp.translations)
    }
}

impl Translator for HttpTranslator {
    fn system_id(&self) -> &str {
        &self.system
    }

    fn translate(&self, items: &[SourceItem<'_>]) -> Vec<Result<String, AdapterError>> {
        let batches: Vec<Vec<Result<String, AdapterError>>> = items
            .par_chunks(self.batch_size)
            .map(|chunk| match self.batch(chunk) {
                Ok(out) => out.into_iter().map(Ok).collect(),
                Err(e) => vec![Err(e); chunk.len()],
            })
            .collect();
        batches.into_iter().flatten().collect()
    }
}

struct CommandTranslator {
    system: String,
    argv: Vec<String>,
}

impl CommandTranslator {
    fn run(&self, items: &[SourceItem<'_>]) -> Result<Vec<String>, AdapterError> {
        let fail = |message: String| AdapterError::Command {
            system: self.system.clone(),
            message,
        };
        let mut child = Command::new(&self.argv[0])
            .args(&self.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(format!("cannot start {:?}: {e}", self.argv[0])))?;
        let mut input = String::new();
        for item in items {
            input.push_str(&item.source.replace(['\r', '\n'], " "));
            input.push('\n');
        }
        let mut stdin = child.stdin.take().expect("piped stdin");
        // Feed stdin from a separate thread so a chatty child cannot deadlock.
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let output = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
        writer
            .join()
            .expect("stdin writer")
            .map_err(|e| fail(format!("writing input: {e}")))?;
        if !output.status.success() {
            return Err(fail(format!(
                "{}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let text = String::from_utf8(output.stdout).map_err(|e| fail(e.to_string()))?;
        let lines: Vec<String> = text.lines().map(str::to_string).collect();
        if lines.len() != items.len() {
            return Err(AdapterError::CountMismatch {
                system: self.system.clone(),
                expected: items.len(),
                got: lines.len(),
            });
        }
        Ok(lines)
    }
}

impl Translator for CommandTranslator {
    fn system_id(&self) -> &str {
        &self.system
    }

    fn translate(&self, items: &[SourceItem<'_>]) -> Vec<Result<String, AdapterError>> {
        if items.is_empty() {
            return Vec::new();
        }
        match self.run(items) {
            Ok(out) => out.into_iter().map(Ok).collect(),
            Err(e) => vec![Err(e); items.len()],
        }
    }
}

#[derive(Deserialize)]
struct FileRecord {
    case_id: String,
    translation: String,
}

/// Precomputed translations keyed by case id.
pub struct FileTranslator {
    system: String,
    by_case: HashMap<String, String>,
}

impl FileTranslator {
    pub fn load(system: &str, path: &Path) -> Result<Self, AdapterError> {
        let records: Vec<FileRecord> = jsonl::read(path).map_err(|e: JsonlError| AdapterError::Io {
            system: system.to_string(),
            message: e.to_string(),
        })?;
        Ok(Self {
            system: system.to_string(),
            by_case: records.into_iter().map(|r| (r.case_id, r.translation)).collect(),
        })
    }

    pub fn from_map(system: &str, by_case: HashMap<String, String>) -> Self {
        Self {
            system: system.to_string(),
            by_case,
        }
    }
}

impl Translator for FileTranslator {
    fn system_id(&self) -> &str {
        &self.system
    }

    fn cacheable(&self) -> bool {
        false
    }

    fn translate(&self, items: &[SourceItem<'_>]) -> Vec<Result<String, AdapterError>> {
        items
            .iter()
            .map(|i| {
                self.by_case
                    .get(i.case_id)
                    .cloned()
                    .ok_or_else(|| AdapterError::MissingTranslation {
                        system: self.system.clone(),
                        case_id: i.case_id.to_string(),
                    })
            })
            .collect()
    }
}
