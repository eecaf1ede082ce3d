//! Language model providers and the retrying, audited query loop.

mod http;
mod mock;
mod ratelimit;

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{GeminiProvider, OpenAiProvider, ProviderSettings, RemoteSettings};
pub use mock::{MockMode, MockProvider, PROSE_RESPONSE};
pub use ratelimit::TokenBucket;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    /// Network failures, rate limiting and server errors; retried.
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider rejected the request ({status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("provider authentication failed: {0}")]
    Auth(String),
    #[error("provider misconfigured: {0}")]
    Config(String),
}

impl ProviderError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, ProviderError::Transient(_))
    }

    /// Errors that stop a run rather than failing one attempt.
    pub fn is_fatal(&self) -> bool {
        matches!(self, ProviderError::Auth(_) | ProviderError::Config(_))
    }
}

/// Per-request parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryParams {
    pub temperature: f64,
    pub timeout: Duration,
    /// Canonical key of the finding being fixed. Remote providers ignore it;
    /// the mock provider picks its response by it.
    pub policy_key: Option<String>,
}

impl Default for QueryParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            timeout: Duration::from_secs(120),
            policy_key: None,
        }
    }
}

pub trait Provider: Send + Sync {
    fn id(&self) -> &str;

    fn model(&self) -> &str;

    fn send(&self, prompt: &str, params: &QueryParams) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Serialize)]
struct AuditRecord<'a> {
    timestamp: String,
    provider: &'a str,
    model: &'a str,
    try_number: u32,
    request: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Append-only JSON-lines log of every request and response.
#[derive(Debug)]
pub struct AuditLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl AuditLog {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn record(&self, provider: &dyn Provider, try_number: u32, request: &str, result: &Result<String, ProviderError>) {
        let record = AuditRecord {
            timestamp: chrono::Utc::now().to_rfc3339(),
            provider: provider.id(),
            model: provider.model(),
            try_number,
            request,
            response: result.as_ref().ok().map(String::as_str),
            error: result.as_ref().err().map(ToString::to_string),
        };
        let mut line = serde_json::to_string(&record).expect("serializable");
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = file.write_all(line.as_bytes()) {
            tracing::warn!("audit log {}: {e}", self.path.display());
        }
    }
}

/// Sends `prompt`, retrying transient failures with exponential backoff.
pub fn query_provider(
    provider: &dyn Provider,
    prompt: &str,
    params: &QueryParams,
    retry: RetryPolicy,
    audit: Option<&AuditLog>,
) -> Result<String, ProviderError> {
    let mut try_number = 0;
    loop {
        try_number += 1;
        let result = provider.send(prompt, params);
        if let Some(log) = audit {
            log.record(provider, try_number, prompt, &result);
        }
        match result {
            Err(e) if e.is_retriable() && try_number <= retry.retries => {
                let delay = retry.base_delay * 2u32.saturating_pow(try_number - 1);
                tracing::debug!("{} failed ({e}); retrying in {delay:?}", provider.id());
                std::thread::sleep(delay);
            }
            other => return other,
        }
    }
}

/// Builds a provider from its id: `mock`, `mock:<mode>`, `openai` or
/// `gemini`.
pub fn provider_from_id(id: &str, settings: &ProviderSettings) -> Result<Box<dyn Provider>, ProviderError> {
    match id.split_once(':') {
        None if id == "mock" => Ok(Box::new(MockProvider::new(MockMode::Fix))),
        Some(("mock", mode)) => Ok(Box::new(MockProvider::new(mode.parse().map_err(ProviderError::Config)?))),
        None if id == "openai" => Ok(Box::new(OpenAiProvider::from_settings(&settings.openai)?)),
        None if id == "gemini" => Ok(Box::new(GeminiProvider::from_settings(&settings.gemini)?)),
        _ => Err(ProviderError::Config(format!("unknown provider {id:?}"))),
    }
}
