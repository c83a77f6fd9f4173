//! Oracle backends: a generic HTTP JSON endpoint and a scripted mock.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable holding the HTTP backend's API key.
pub const API_KEY_ENV: &str = "VULNCHUNK_ORACLE_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Worth retrying: connection failures, timeouts, 429 and 5xx.
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend failure: {0}")]
    Fatal(String),
}

pub trait OracleBackend: Send + Sync {
    /// Stable identifier recorded in verdicts and cache keys.
    fn id(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

/// Lowercase hex SHA-256 of the prompt bytes.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// One line of a mock script.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub response: String,
    /// Number of transient failures to report before answering.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub fail_times: u32,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

struct Scripted {
    response: String,
    fail_times: u32,
    calls: AtomicU32,
}

/// Answers prompts from a table keyed by prompt hash.
pub struct MockBackend {
    id: String,
    table: HashMap<String, Scripted>,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("reading mock script {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("mock script line {line}: {message}")]
    Line { line: usize, message: String },
}

impl MockBackend {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Result<Self, ScriptError> {
        let mut table = HashMap::new();
        for (i, e) in entries.into_iter().enumerate() {
            let key = match (&e.prompt_sha256, &e.prompt) {
                (Some(h), _) => h.to_ascii_lowercase(),
                (None, Some(p)) => prompt_hash(p),
                (None, None) => {
                    return Err(ScriptError::Line {
                        line: i + 1,
                        message: "entry needs `prompt_sha256` or `prompt`".into(),
                    })
                }
            };
            table.insert(
                key,
                Scripted {
                    response: e.response,
                    fail_times: e.fail_times,
                    calls: AtomicU32::new(0),
                },
            );
        }
        Ok(Self {
            id: "mock".into(),
            table,
        })
    }

    pub fn from_jsonl(path: &Path) -> Result<Self, ScriptError> {
        let text = fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<ScriptEntry>(l).map_err(|e| ScriptError::Line {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl OracleBackend for MockBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let hash = prompt_hash(prompt);
        let entry = self
            .table
            .get(&hash)
            .ok_or_else(|| BackendError::Fatal(format!("no scripted response for prompt {hash}")))?;
        let call = entry.calls.fetch_add(1, Ordering::SeqCst);
        if call < entry.fail_times {
            return Err(BackendError::Transient(format!("scripted failure {} of {}", call + 1, entry.fail_times)));
        }
        Ok(entry.response.clone())
    }
}

/// POSTs `{model, prompt}` as JSON and reads the completion text back.
pub struct HttpBackend {
    id: String,
    url: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct HttpRequest<'a> {
    model: &'a str,
    prompt: &'a str,
}

impl HttpBackend {
    /// The API key is read from [`API_KEY_ENV`] when set.
    pub fn new(url: &str, model: &str, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Fatal(format!("building HTTP client: {e}")))?;
        Ok(Self {
            id: format!("http:{model}"),
            url: url.to_owned(),
            model: model.to_owned(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            client,
        })
    }
}

impl OracleBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let mut req = self.client.post(&self.url).json(&HttpRequest {
            model: &self.model,
            prompt,
        });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| BackendError::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("HTTP {status}: {body}")));
        }
        Ok(completion_text(&body))
    }
}

/// Extract the completion from common response shapes, falling back to the
/// raw body.
fn completion_text(body: &str) -> String {
    let Ok(json) = serde_json::from_str::<serde_json::Value>(body) else {
        return body.to_owned();
    };
    for key in ["response", "text", "content", "output", "completion"] {
        if let Some(s) = json.get(key).and_then(|v| v.as_str()) {
            return s.to_owned();
        }
    }
    let choice = &json["choices"][0];
    if let Some(s) = choice["message"]["content"].as_str().or_else(|| choice["text"].as_str()) {
        return s.to_owned();
    }
    body.to_owned()
}
