//! LLM providers: a chat-completion HTTP client and an offline replay
//! provider that serves canned responses from fixture files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::http::{HttpError, JsonClient, RetryPolicy};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("LLM provider {provider}: {source}")]
    Http {
        provider: String,
        #[source]
        source: HttpError,
    },
    #[error("LLM provider {provider}: response has no message content")]
    NoContent { provider: String },
    #[error("replay fixture {fixture} has no responses left")]
    ReplayExhausted { fixture: String },
    #[error("no replay fixture matches prompt ending in {last_line:?}")]
    NoFixture { last_line: String },
    #[error("replay fixture {path}: {message}")]
    Fixture { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sampling {
    pub temperature: f64,
    pub presence_penalty: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            temperature: 0.9,
            presence_penalty: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlmRequest {
    pub prompt: String,
    pub temperature: f64,
    pub presence_penalty: f64,
    pub provider_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LlmRequest {
    pub fn new(prompt: impl Into<String>, sampling: Sampling, provider_id: &str) -> Self {
        Self {
            prompt: prompt.into(),
            temperature: sampling.temperature.max(0.0),
            presence_penalty: sampling.presence_penalty,
            provider_id: provider_id.to_string(),
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

pub trait LlmProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, req: &LlmRequest) -> Result<String, ProviderError>;
}

impl<P: LlmProvider + ?Sized> LlmProvider for &P {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn complete(&self, req: &LlmRequest) -> Result<String, ProviderError> {
        (**self).complete(req)
    }
}

impl<P: LlmProvider + ?Sized> LlmProvider for Box<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn complete(&self, req: &LlmRequest) -> Result<String, ProviderError> {
        (**self).complete(req)
    }
}

/// OpenAI-style chat completion endpoint.
#[derive(Debug)]
pub struct ChatProvider {
    id: String,
    url: String,
    model: String,
    api_key: Option<String>,
    client: JsonClient,
    retry: RetryPolicy,
}

impl ChatProvider {
    pub fn new(id: impl Into<String>, url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            url: url.into(),
            model: model.into(),
            api_key: None,
            client: JsonClient::default(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    presence_penalty: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl LlmProvider for ChatProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &LlmRequest) -> Result<String, ProviderError> {
        let body = ChatBody {
            model: &self.model,
            messages: [ChatMessage {
                role: "user",
                content: &req.prompt,
            }],
            temperature: req.temperature,
            presence_penalty: req.presence_penalty,
            seed: req.seed,
        };
        let headers: Vec<(&str, String)> = self
            .api_key
            .iter()
            .map(|k| ("Authorization", format!("Bearer {k}")))
            .collect();
        let resp: Value = self
            .retry
            .run(
                |_| self.client.post(&self.url, &headers, &body),
                HttpError::is_retryable,
            )
            .map_err(|source| ProviderError::Http {
                provider: self.id.clone(),
                source,
            })?;
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::NoContent {
                provider: self.id.clone(),
            })
    }
}

/// One canned-response fixture.
///
/// A fixture applies to a prompt when its `last_line` equals the prompt's
/// last non-blank line (trimmed), or its `contains` text occurs in the
/// prompt. A fixture with neither field applies to every prompt. Fixtures
/// are tried in order. `echo` answers with the prompt's last line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayFixture {
    #[serde(skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_line: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    pub responses: Vec<String>,
    pub cycle: bool,
    pub echo: bool,
}

impl ReplayFixture {
    fn applies(&self, prompt: &str, last_line: &str) -> bool {
        match (&self.last_line, &self.contains) {
            (None, None) => true,
            (l, c) => {
                l.as_deref().is_some_and(|l| l.trim() == last_line) || c.as_deref().is_some_and(|c| prompt.contains(c))
            }
        }
    }
}

fn last_line(prompt: &str) -> &str {
    prompt
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
}

/// Serves canned responses. Each fixture hands out its responses in order.
#[derive(Debug)]
pub struct ReplayProvider {
    id: String,
    fixtures: Vec<ReplayFixture>,
    served: Mutex<Vec<usize>>,
}

impl ReplayProvider {
    pub fn new(id: impl Into<String>, fixtures: Vec<ReplayFixture>) -> Self {
        let served = Mutex::new(vec![0; fixtures.len()]);
        Self {
            id: id.into(),
            fixtures,
            served,
        }
    }

    /// Loads every `*.json` file in `dir` (a fixture object or an array of
    /// them), in file-name order.
    pub fn from_dir(id: impl Into<String>, dir: &Path) -> Result<Self, ProviderError> {
        let fixture_err = |path: &Path, message: String| ProviderError::Fixture {
            path: path.to_path_buf(),
            message,
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| fixture_err(dir, e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut fixtures = Vec::new();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| fixture_err(&path, e.to_string()))?;
            let value: Value = serde_json::from_str(&text).map_err(|e| fixture_err(&path, e.to_string()))?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let mut batch: Vec<ReplayFixture> = if value.is_array() {
                serde_json::from_value(value)
            } else {
                serde_json::from_value(value).map(|f| vec![f])
            }
            .map_err(|e| fixture_err(&path, e.to_string()))?;
            for (i, f) in batch.iter_mut().enumerate() {
                if f.name.is_empty() {
                    f.name = format!("{stem}#{i}");
                }
            }
            fixtures.extend(batch);
        }
        Ok(Self::new(id, fixtures))
    }
}

impl LlmProvider for ReplayProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &LlmRequest) -> Result<String, ProviderError> {
        let last = last_line(&req.prompt);
        let (idx, fixture) = self
            .fixtures
            .iter()
            .enumerate()
            .find(|(_, f)| f.applies(&req.prompt, last))
            .ok_or_else(|| ProviderError::NoFixture {
                last_line: last.to_string(),
            })?;
        if fixture.echo {
            return Ok(last.to_string());
        }
        let mut served = self.served.lock().unwrap();
        let n = served[idx];
        let total = fixture.responses.len();
        let pick = if fixture.cycle && total > 0 {
            Some(n % total)
        } else if n < total {
            Some(n)
        } else {
            None
        };
        match pick {
            Some(i) => {
                served[idx] += 1;
                Ok(fixture.responses[i].clone())
            }
            None => Err(ProviderError::ReplayExhausted {
                fixture: fixture.name.clone(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(prompt: &str) -> LlmRequest {
        LlmRequest::new(prompt, Sampling::default(), "t")
    }

    #[test]
    fn replay_matches_and_exhausts() {
        let p = ReplayProvider::new(
            "r",
            vec![
                ReplayFixture {
                    name: "km".into(),
                    last_line: Some("kilometers".into()),
                    responses: vec!["kilómetros|km".into()],
                    ..Default::default()
                },
                ReplayFixture {
                    name: "echo".into(),
                    echo: true,
                    ..Default::default()
                },
            ],
        );
        assert_eq!(p.complete(&req("demo\n\nkilometers\n")).unwrap(), "kilómetros|km");
        assert!(matches!(
            p.complete(&req("demo\nkilometers")),
            Err(ProviderError::ReplayExhausted { .. })
        ));
        assert_eq!(p.complete(&req("demo\nAlice")).unwrap(), "Alice");
    }

    #[test]
    fn replay_cycles() {
        let p = ReplayProvider::new(
            "r",
            vec![ReplayFixture {
                contains: Some("write".into()),
                responses: vec!["a".into(), "b".into()],
                cycle: true,
                ..Default::default()
            }],
        );
        let got: Vec<String> = (0..3).map(|_| p.complete(&req("write")).unwrap()).collect();
        assert_eq!(got, ["a", "b", "a"]);
        assert!(matches!(
            p.complete(&req("other")),
            Err(ProviderError::NoFixture { .. })
        ));
    }

    #[test]
    fn sampling_defaults() {
        let r = req("x").with_seed(5);
        assert_eq!(r.temperature, 0.9);
        assert_eq!(r.presence_penalty, 2.0);
        assert_eq!(r.seed, Some(5));
    }
}
