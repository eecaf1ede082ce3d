//! Chat-completion and Gemini `generateContent` providers.

use reqwest::blocking::{Client, Response};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Provider, ProviderError, QueryParams, TokenBucket};

/// Settings for one remote provider. The API key is read from the named
/// environment variable, never from the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteSettings {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub requests_per_minute: u32,
    pub temperature: f64,
}

/// Contents of the provider configuration file (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSettings {
    pub openai: RemoteSettings,
    pub gemini: RemoteSettings,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        Self {
            openai: RemoteSettings {
                endpoint: "https://api.openai.com/v1/chat/completions".into(),
                model: "gpt-4o".into(),
                api_key_env: "OPENAI_API_KEY".into(),
                requests_per_minute: 60,
                temperature: 0.0,
            },
            gemini: RemoteSettings {
                endpoint: "https://generativelanguage.googleapis.com/v1beta".into(),
                model: "gemini-1.5-pro".into(),
                api_key_env: "GEMINI_API_KEY".into(),
                requests_per_minute: 15,
                temperature: 0.0,
            },
        }
    }
}

impl Default for RemoteSettings {
    fn default() -> Self {
        ProviderSettings::default().openai
    }
}

impl ProviderSettings {
    pub fn from_toml(text: &str) -> Result<Self, ProviderError> {
        // missing tables and keys fall back to the per-provider defaults
        let raw: toml::Table = toml::from_str(text).map_err(|e| ProviderError::Config(e.to_string()))?;
        let mut out = Self::default();
        for (name, slot) in [("openai", &mut out.openai), ("gemini", &mut out.gemini)] {
            if let Some(table) = raw.get(name) {
                let mut merged = toml::Table::try_from(&*slot).unwrap_or_default();
                if let Some(t) = table.as_table() {
                    merged.extend(t.clone());
                }
                *slot = toml::Value::Table(merged)
                    .try_into()
                    .map_err(|e: toml::de::Error| ProviderError::Config(format!("[{name}]: {e}")))?;
            }
        }
        if let Some(unknown) = raw.keys().find(|k| *k != "openai" && *k != "gemini") {
            return Err(ProviderError::Config(format!("unknown provider table [{unknown}]")));
        }
        Ok(out)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

fn api_key(settings: &RemoteSettings) -> Result<String, ProviderError> {
    std::env::var(&settings.api_key_env)
        .ok()
        .filter(|k| !k.trim().is_empty())
        .ok_or_else(|| ProviderError::Config(format!("{} is not set", settings.api_key_env)))
}

fn client() -> Result<Client, ProviderError> {
    Client::builder()
        .build()
        .map_err(|e| ProviderError::Config(e.to_string()))
}

fn check_status(response: Response) -> Result<Value, ProviderError> {
    let status = response.status();
    let body = response.text().map_err(|e| ProviderError::Transient(e.to_string()))?;
    match status.as_u16() {
        200..=299 => serde_json::from_str(&body).map_err(|e| ProviderError::Transient(format!("bad response body: {e}"))),
        401 | 403 => Err(ProviderError::Auth(body)),
        408 | 429 | 500..=599 => Err(ProviderError::Transient(format!("{status}: {body}"))),
        code => Err(ProviderError::Rejected { status: code, body }),
    }
}

fn transport(e: reqwest::Error) -> ProviderError {
    ProviderError::Transient(e.to_string())
}

/// OpenAI-compatible `/chat/completions` endpoint.
#[derive(Debug)]
pub struct OpenAiProvider {
    client: Client,
    settings: RemoteSettings,
    api_key: String,
    limiter: TokenBucket,
}

impl OpenAiProvider {
    pub fn from_settings(settings: &RemoteSettings) -> Result<Self, ProviderError> {
        Ok(Self {
            client: client()?,
            api_key: api_key(settings)?,
            limiter: TokenBucket::per_minute(settings.requests_per_minute),
            settings: settings.clone(),
        })
    }
}

impl Provider for OpenAiProvider {
    fn id(&self) -> &str {
        "openai"
    }

    fn model(&self) -> &str {
        &self.settings.model
    }

    fn send(&self, prompt: &str, params: &QueryParams) -> Result<String, ProviderError> {
        self.limiter.acquire();
        let body = json!({
            "model": self.settings.model,
            "temperature": params.temperature.max(self.settings.temperature),
            "messages": [{"role": "user", "content": prompt}],
        });
        let response = self
            .client
            .post(&self.settings.endpoint)
            .bearer_auth(&self.api_key)
            .timeout(params.timeout)
            .json(&body)
            .send()
            .map_err(transport)?;
        let value = check_status(response)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Transient("response has no choices[0].message.content".into()))
    }
}

/// Gemini `models/<model>:generateContent`.
#[derive(Debug)]
pub struct GeminiProvider {
    client: Client,
    settings: RemoteSettings,
    api_key: String,
    limiter: TokenBucket,
}

impl GeminiProvider {
    pub fn from_settings(settings: &RemoteSettings) -> Result<Self, ProviderError> {
        Ok(Self {
            client: client()?,
            api_key: api_key(settings)?,
            limiter: TokenBucket::per_minute(settings.requests_per_minute),
            settings: settings.clone(),
        })
    }
}

impl Provider for GeminiProvider {
    fn id(&self) -> &str {
        "gemini"
    }

    fn model(&self) -> &str {
        &self.settings.model
    }

    fn send(&self, prompt: &str, params: &QueryParams) -> Result<String, ProviderError> {
        self.limiter.acquire();
        let url = format!(
            "{}/models/{}:generateContent",
            self.settings.endpoint.trim_end_matches('/'),
            self.settings.model
        );
        let body = json!({
            "contents": [{"role": "user", "parts": [{"text": prompt}]}],
            "generationConfig": {"temperature": params.temperature.max(self.settings.temperature)},
        });
        let response = self
            .client
            .post(url)
            .header("x-goog-api-key", &self.api_key)
            .timeout(params.timeout)
            .json(&body)
            .send()
            .map_err(transport)?;
        let value = check_status(response)?;
        // a blocked or empty candidate is an answer with no text
        let parts = value["candidates"][0]["content"]["parts"].as_array().cloned().unwrap_or_default();
        Ok(parts.iter().filter_map(|p| p["text"].as_str()).collect())
    }
}
