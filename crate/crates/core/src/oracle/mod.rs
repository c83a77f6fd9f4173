//! Line-level vulnerability oracle.
//!
//! A prompt asks for three lists (`line_code`, `vul_lines`, `vul_category`),
//! each of which may come back as `['None']`. Replies are parsed leniently:
//! the first dictionary literal holding all three keys wins, wherever it
//! sits in the text.

mod backend;
mod literal;
mod throttle;

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{prompt_hash, BackendError, HttpBackend, MockBackend, OracleBackend, ScriptEntry, ScriptError, API_KEY_ENV};
pub use literal::{parse_literal, Value};
pub use throttle::{Slots, TokenBucket};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PromptVariant {
    CodeOnly,
    CodePlusDescription,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("prompt variant CODE_PLUS_DESCRIPTION needs a non-empty description")]
    MissingDescription,
    #[error("prompt code is empty")]
    EmptyCode,
    #[error("oracle unavailable after {attempts} attempt(s): {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("no dictionary with line_code, vul_lines and vul_category in response")]
    UnparseableResponse { raw: String },
}

const TASK: &str = "Task: Extract the following information:
1. Identify the lines of code that contain vulnerabilities. Return these lines in a list of string named as line_code. If no vulnerable lines are found, return ['None']. Ensure the list is formatted with items separated by commas and enclosed in square brackets.
2. Determine the line numbers of vulnerable code. Return these line numbers in a list of integer named as vul_lines. If no such lines exist, return ['None'].
3. List the affected vulnerability categories. Return these in a list of string named as vul_category. If no categories are affected, return ['None'].
Please provide the output in three keys as dictionary format: line_code, vul_lines, and vul_category. Do not need an explanation.";

/// Vulnerable-line detection prompt. `description` is only used (and then
/// required) for [`PromptVariant::CodePlusDescription`].
pub fn build_prompt(code: &str, variant: PromptVariant, description: Option<&str>) -> Result<String, OracleError> {
    if code.trim().is_empty() {
        return Err(OracleError::EmptyCode);
    }
    let mut prompt = format!("Given the following function code: {code}\n");
    if variant == PromptVariant::CodePlusDescription {
        let desc = description
            .map(str::trim)
            .filter(|d| !d.is_empty())
            .ok_or(OracleError::MissingDescription)?;
        prompt.push_str(&format!("And the associated CVE description: {desc}\n"));
    }
    prompt.push('\n');
    prompt.push_str(TASK);
    Ok(prompt)
}

/// Parsed oracle reply. A `None` field is the explicit "None" answer.
/// `vul_lines` are 0-based, relative to the code that was submitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub line_code: Option<Vec<String>>,
    pub vul_lines: Option<Vec<usize>>,
    pub vul_category: Option<Vec<String>>,
    pub raw_response: String,
    pub backend_id: String,
}

impl OracleVerdict {
    /// Flagged lines for labeling; absent when any of the three answers is
    /// "None".
    pub fn vulnerable_lines(&self) -> Option<&[usize]> {
        if self.line_code.is_none() || self.vul_category.is_none() {
            return None;
        }
        self.vul_lines.as_deref()
    }
}

fn is_none_marker(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Str(s) => s.trim().eq_ignore_ascii_case("none"),
        _ => false,
    }
}

fn as_items(v: &Value) -> Vec<&Value> {
    match v {
        Value::List(items) => items.iter().filter(|i| !is_none_marker(i)).collect(),
        other if is_none_marker(other) => Vec::new(),
        other => vec![other],
    }
}

fn string_list(v: &Value) -> Option<Vec<String>> {
    let out: Vec<String> = as_items(v)
        .into_iter()
        .map(|i| match i {
            Value::Str(s) => s.clone(),
            Value::Int(n) => n.to_string(),
            Value::Float(f) => f.to_string(),
            Value::Bool(b) => b.to_string(),
            other => format!("{other:?}"),
        })
        .collect();
    (!out.is_empty()).then_some(out)
}

/// 1-based numbers (or `"a-b"` ranges) to sorted, deduplicated 0-based
/// indices. Zero and non-numeric entries are dropped.
fn line_list(v: &Value) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    for item in as_items(v) {
        match item {
            Value::Int(n) if *n >= 1 => out.push(*n as usize - 1),
            Value::Float(f) if f.fract() == 0.0 && *f >= 1.0 => out.push(*f as usize - 1),
            Value::Str(s) => {
                let s = s.trim();
                if let Some((a, b)) = s.split_once('-') {
                    if let (Ok(a), Ok(b)) = (a.trim().parse::<usize>(), b.trim().parse::<usize>()) {
                        if a >= 1 && a <= b && b - a < 10_000 {
                            out.extend((a..=b).map(|n| n - 1));
                        }
                    }
                } else if let Ok(n) = s.parse::<usize>() {
                    if n >= 1 {
                        out.push(n - 1);
                    }
                }
            }
            _ => {}
        }
    }
    out.sort_unstable();
    out.dedup();
    (!out.is_empty()).then_some(out)
}

/// Parse an oracle reply into a verdict.
pub fn parse_response(raw: &str, backend_id: &str) -> Result<OracleVerdict, OracleError> {
    for (start, _) in raw.match_indices('{') {
        let Some((dict, _)) = parse_literal(&raw[start..]) else {
            continue;
        };
        let (Some(code), Some(lines), Some(cats)) =
            (dict.get("line_code"), dict.get("vul_lines"), dict.get("vul_category"))
        else {
            continue;
        };
        return Ok(OracleVerdict {
            line_code: string_list(code),
            vul_lines: line_list(lines),
            vul_category: string_list(cats),
            raw_response: raw.to_owned(),
            backend_id: backend_id.to_owned(),
        });
    }
    Err(OracleError::UnparseableResponse { raw: raw.to_owned() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubled for each later one.
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

/// Thread-safe oracle front end: retries, rate limit, in-flight cap and an
/// optional on-disk cache of raw replies.
pub struct OracleClient {
    backend: Arc<dyn OracleBackend>,
    retry: RetryPolicy,
    limiter: Option<TokenBucket>,
    slots: Slots,
    cache_dir: Option<PathBuf>,
}

impl OracleClient {
    pub fn new(backend: Arc<dyn OracleBackend>, retry: RetryPolicy) -> Self {
        Self {
            backend,
            retry,
            limiter: None,
            slots: Slots::new(8),
            cache_dir: None,
        }
    }

    pub fn with_rate_limit(mut self, per_minute: u32) -> Self {
        self.limiter = Some(TokenBucket::per_minute(per_minute));
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.slots = Slots::new(n);
        self
    }

    pub fn with_cache(mut self, dir: PathBuf) -> Self {
        self.cache_dir = Some(dir);
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    /// Raw completion with retries on transient failures.
    pub fn complete(&self, prompt: &str) -> Result<String, OracleError> {
        let cache_path = self.cache_dir.as_ref().map(|d| {
            d.join(format!(
                "{}.txt",
                prompt_hash(&format!("{}\0{prompt}", self.backend.id()))
            ))
        });
        if let Some(hit) = cache_path.as_ref().and_then(|p| fs::read_to_string(p).ok()) {
            return Ok(hit);
        }

        let max = self.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..max {
            if attempt > 0 {
                thread::sleep(self.retry.backoff.saturating_mul(1 << (attempt - 1).min(16)));
            }
            let result = {
                let _slot = self.slots.acquire();
                if let Some(l) = &self.limiter {
                    l.acquire();
                }
                self.backend.complete(prompt)
            };
            match result {
                Ok(text) => {
                    if let Some(path) = &cache_path {
                        write_atomic(path, &text);
                    }
                    return Ok(text);
                }
                Err(BackendError::Transient(m)) => {
                    log::debug!("oracle attempt {} failed: {m}", attempt + 1);
                    last = m;
                }
                Err(BackendError::Fatal(m)) => {
                    return Err(OracleError::Unavailable {
                        attempts: attempt + 1,
                        message: m,
                    })
                }
            }
        }
        Err(OracleError::Unavailable {
            attempts: max,
            message: last,
        })
    }

    /// Submit a prompt and parse the reply.
    pub fn query(&self, prompt: &str) -> Result<OracleVerdict, OracleError> {
        let raw = self.complete(prompt)?;
        parse_response(&raw, self.backend.id())
    }
}

fn write_atomic(path: &std::path::Path, text: &str) {
    let Some(dir) = path.parent() else { return };
    if fs::create_dir_all(dir).is_err() {
        return;
    }
    let tmp = dir.join(format!(
        ".{}.{:?}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("entry"),
        thread::current().id()
    ));
    if fs::write(&tmp, text).is_ok() && fs::rename(&tmp, path).is_err() {
        let _ = fs::remove_file(&tmp);
    }
}
