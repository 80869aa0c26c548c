//! Chat-completion backends: an OpenAI-compatible HTTP client and a
//! deterministic scripted mock.

mod http;
mod limiter;
mod mock;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use http::{backoff_delay, HttpBackend};
pub use limiter::{Limited, Limiter, Permit};
pub use mock::{detect_role, mock_complete, MockBackend, MockBank, MockRole, MOCK_BANK_JSON};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>, temperature: f64) -> Self {
        ChatRequest { messages, temperature, max_tokens: 256, seed: None }
    }

    pub fn system_prompt(&self) -> &str {
        self.messages.first().map_or("", |m| m.content.as_str())
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let Some(first) = self.messages.first() else {
            return Err(BackendError::InvalidRequest("no messages".into()));
        };
        if first.role != Role::System {
            return Err(BackendError::InvalidRequest("first message must be the system prompt".into()));
        }
        if let Some(i) = self.messages.iter().position(|m| m.content.trim().is_empty()) {
            return Err(BackendError::InvalidRequest(format!("message {i} is empty")));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(BackendError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    #[default]
    Mock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: Option<String>,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_token_env: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// Base of the exponential backoff schedule, in seconds.
    pub backoff_base_secs: f64,
    pub backoff_jitter: bool,
    /// Seed mixed into every mock completion.
    pub mock_seed: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint_url: None,
            model_name: "mock".into(),
            auth_token_env: None,
            timeout_secs: 60.0,
            max_retries: 3,
            max_in_flight: 4,
            backoff_base_secs: 0.5,
            backoff_jitter: true,
            mock_seed: 0,
        }
    }
}

impl BackendConfig {
    pub fn mock(seed: u64) -> Self {
        BackendConfig { mock_seed: seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_in_flight == 0 {
            return Err(BackendError::Config("max_in_flight must be at least 1".into()));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(BackendError::Config("timeout must be positive".into()));
        }
        if !(self.backoff_base_secs.is_finite() && self.backoff_base_secs >= 0.0) {
            return Err(BackendError::Config("backoff base must be >= 0".into()));
        }
        if self.kind == BackendKind::Http {
            match &self.endpoint_url {
                Some(u) if !u.trim().is_empty() => {}
                _ => return Err(BackendError::Config("http backend needs endpoint_url".into())),
            }
        }
        Ok(())
    }

    /// Short identifier recorded in corpus provenance.
    pub fn id(&self) -> String {
        match self.kind {
            BackendKind::Mock => format!("mock:{}:seed={}", MockBank::bundled().version, self.mock_seed),
            BackendKind::Http => format!(
                "http:{}@{}",
                self.model_name,
                self.endpoint_url.as_deref().unwrap_or("")
            ),
        }
    }
}

/// A bearer token. Never printed.
#[derive(Clone)]
pub struct Secret(String);

impl Secret {
    pub fn new(s: String) -> Self {
        Secret(s)
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

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("request rejected with HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("backend returned an empty completion")]
    EmptyOutput,
}

/// Anything that turns a chat request into assistant text.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;

    fn id(&self) -> String;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn id(&self) -> String {
        (**self).id()
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn id(&self) -> String {
        (**self).id()
    }
}

/// Builds the configured backend behind a `max_in_flight` limiter.
/// Token resolution happens here, so a missing variable fails before any
/// request is sent.
pub fn build_backend(config: &BackendConfig) -> Result<Arc<dyn Backend>, BackendError> {
    config.validate()?;
    let inner: Arc<dyn Backend> = match config.kind {
        BackendKind::Mock => Arc::new(MockBackend::new(config.mock_seed)),
        BackendKind::Http => Arc::new(HttpBackend::from_config(config)?),
    };
    Ok(Arc::new(Limited::new(inner, config.max_in_flight)))
}

/// One-shot completion against `config`.
pub fn complete(config: &BackendConfig, request: &ChatRequest) -> Result<String, BackendError> {
    build_backend(config)?.complete(request)
}

/// Trims and rejects empty completions.
pub(crate) fn finish(text: &str) -> Result<String, BackendError> {
    let t = text.trim();
    if t.is_empty() {
        Err(BackendError::EmptyOutput)
    } else {
        Ok(t.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        let ok = ChatRequest::new(vec![ChatMessage::system("s"), ChatMessage::user("u")], 0.7);
        ok.validate().unwrap();
        let bad = ChatRequest::new(vec![ChatMessage::user("u")], 0.7);
        assert!(bad.validate().is_err());
        let empty = ChatRequest::new(vec![], 0.7);
        assert!(empty.validate().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(BackendConfig { max_in_flight: 0, ..Default::default() }.validate().is_err());
        assert!(BackendConfig { kind: BackendKind::Http, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn secret_is_redacted() {
        assert_eq!(format!("{:?}", Secret::new("sk-abc".into())), "Secret(***)");
    }
}
