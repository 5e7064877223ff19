//! Single-turn chat completion over HTTP, plus a fixture-backed stub.

use std::fmt;
use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    /// Reads `<sha256(prompt)>.txt`, falling back to `default.txt`, from a fixture directory.
    #[default]
    Stub,
    OpenAi,
    Anthropic,
}

/// API key read from the environment. Never printed.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Secret(s.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

fn default_temperature() -> f64 {
    0.0
}
fn default_top_p() -> f64 {
    1.0
}
fn default_top_k() -> Option<u32> {
    Some(250)
}
fn default_in_flight() -> usize {
    4
}
fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_max_tokens() -> u32 {
    1024
}
fn default_key_env() -> String {
    "POPBIAS_API_KEY".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    #[serde(default)]
    pub dialect: Dialect,
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub model_name: String,
    /// Name of the environment variable holding the key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(skip)]
    pub api_key: Option<Secret>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    /// Sent only by dialects that accept it.
    #[serde(default = "default_top_k")]
    pub top_k: Option<u32>,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default)]
    pub stub_dir: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            dialect: Dialect::Stub,
            endpoint: String::new(),
            model_name: String::new(),
            api_key_env: default_key_env(),
            api_key: None,
            temperature: default_temperature(),
            top_p: default_top_p(),
            top_k: default_top_k(),
            max_tokens: default_max_tokens(),
            max_in_flight: default_in_flight(),
            timeout_secs: default_timeout(),
            retries: default_retries(),
            backoff_ms: default_backoff(),
            stub_dir: None,
        }
    }
}

impl ProviderConfig {
    /// The model name, or the dialect when none is set.
    pub fn label(&self) -> &str {
        match (self.model_name.as_str(), self.dialect) {
            ("", Dialect::Stub) => "stub",
            ("", Dialect::OpenAi) => "openai",
            ("", Dialect::Anthropic) => "anthropic",
            (m, _) => m,
        }
    }

    pub fn stub(dir: impl Into<PathBuf>) -> Self {
        Self { stub_dir: Some(dir.into()), ..Self::default() }
    }

    /// Loads the key from `api_key_env` if that variable is set.
    pub fn with_key_from_env(mut self) -> Self {
        self.api_key = std::env::var(&self.api_key_env).ok().map(Secret::new);
        self
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |m: &str| Err(ProviderError::Config(m.to_owned()));
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        if !(self.timeout_secs > 0.0) {
            return bad("timeout_secs must be positive");
        }
        match self.dialect {
            Dialect::Stub if self.stub_dir.is_none() => bad("stub dialect needs stub_dir"),
            Dialect::OpenAi | Dialect::Anthropic if self.endpoint.is_empty() || self.model_name.is_empty() => {
                bad("endpoint and model_name are required")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("invalid provider config: {0}")]
    Config(String),
    #[error("authentication failed (status {status}): {body}")]
    Authentication { status: u16, body: String },
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    Response(String),
    #[error("no stub fixture for prompt {hash} in {dir}")]
    StubMissing { hash: String, dir: String },
}

pub fn prompt_hash(prompt: &str) -> String {
    format!("{:x}", Sha256::digest(prompt.as_bytes()))
}

fn excerpt(body: &str) -> String {
    body.chars().take(200).collect()
}

enum Attempt {
    Done(String),
    Retry(ProviderError),
    Fatal(ProviderError),
}

/// Reusable HTTP client for one provider configuration.
pub struct ChatClient {
    cfg: ProviderConfig,
    http: reqwest::blocking::Client,
}

impl ChatClient {
    pub fn new(cfg: ProviderConfig) -> Result<Self, ProviderError> {
        cfg.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self { cfg, http })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.cfg
    }

    /// The completion text for `prompt`. Transport failures, 429 and 5xx responses are
    /// retried up to `retries` times with exponential backoff.
    pub fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        if self.cfg.dialect == Dialect::Stub {
            return self.stub(prompt);
        }
        let mut attempt = 0;
        loop {
            match self.call(prompt) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) if attempt >= self.cfg.retries => return Err(e),
                Attempt::Retry(_) => {
                    thread::sleep(Duration::from_millis(self.cfg.backoff_ms.saturating_mul(1 << attempt.min(16))));
                    attempt += 1;
                }
            }
        }
    }

    fn stub(&self, prompt: &str) -> Result<String, ProviderError> {
        let dir = self.cfg.stub_dir.as_ref().expect("validated");
        let hash = prompt_hash(prompt);
        for name in [format!("{hash}.txt"), "default.txt".to_owned()] {
            if let Ok(text) = std::fs::read_to_string(dir.join(name)) {
                return Ok(text);
            }
        }
        Err(ProviderError::StubMissing { hash, dir: dir.display().to_string() })
    }

    fn request_body(&self, prompt: &str) -> Value {
        let messages = json!([{ "role": "user", "content": prompt }]);
        match self.cfg.dialect {
            Dialect::Anthropic => {
                let mut body = json!({
                    "model": self.cfg.model_name,
                    "max_tokens": self.cfg.max_tokens,
                    "messages": messages,
                    "temperature": self.cfg.temperature,
                    "top_p": self.cfg.top_p,
                });
                if let Some(k) = self.cfg.top_k {
                    body["top_k"] = json!(k);
                }
                body
            }
            _ => json!({
                "model": self.cfg.model_name,
                "max_tokens": self.cfg.max_tokens,
                "messages": messages,
                "temperature": self.cfg.temperature,
                "top_p": self.cfg.top_p,
            }),
        }
    }

    fn call(&self, prompt: &str) -> Attempt {
        let key = self.cfg.api_key.as_ref().map(Secret::expose).unwrap_or("");
        let req = self.http.post(&self.cfg.endpoint).json(&self.request_body(prompt));
        let req = match self.cfg.dialect {
            Dialect::Anthropic => req.header("x-api-key", key).header("anthropic-version", "2023-06-01"),
            _ => req.bearer_auth(key),
        };
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(ProviderError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let body = match resp.text() {
            Ok(b) => b,
            Err(e) => return Attempt::Retry(ProviderError::Transport(e.to_string())),
        };
        match status {
            200..=299 => match self.extract(&body) {
                Ok(text) => Attempt::Done(text),
                Err(e) => Attempt::Fatal(e),
            },
            401 | 403 => Attempt::Fatal(ProviderError::Authentication { status, body: excerpt(&body) }),
            429 | 500..=599 => Attempt::Retry(ProviderError::Status { status, body: excerpt(&body) }),
            _ => Attempt::Fatal(ProviderError::Status { status, body: excerpt(&body) }),
        }
    }

    fn extract(&self, body: &str) -> Result<String, ProviderError> {
        let v: Value = serde_json::from_str(body).map_err(|e| ProviderError::Response(e.to_string()))?;
        let text = match self.cfg.dialect {
            Dialect::Anthropic => v["content"][0]["text"].as_str(),
            _ => v["choices"][0]["message"]["content"].as_str(),
        };
        text.map(str::to_owned).ok_or_else(|| ProviderError::Response(excerpt(body)))
    }
}

/// One-shot helper: builds a client for `cfg` and completes `prompt`.
pub fn complete_chat(prompt: &str, cfg: &ProviderConfig) -> Result<String, ProviderError> {
    ChatClient::new(cfg.clone())?.complete(prompt)
}
