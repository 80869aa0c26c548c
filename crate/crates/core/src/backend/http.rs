use std::time::Duration;

use rand::Rng;
use serde::Serialize;
use serde_json::Value;

use super::{finish, Backend, BackendConfig, BackendError, ChatMessage, ChatRequest, Secret};

const BACKOFF_CAP_SECS: f64 = 30.0;
const BODY_EXCERPT_CHARS: usize = 300;

/// Delay before retry `attempt` (0-based): `base * 2^attempt`, capped at
/// 30 s, optionally scaled by a uniform factor in [0.8, 1.2].
pub fn backoff_delay<R: Rng>(base_secs: f64, attempt: u32, jitter: Option<&mut R>) -> Duration {
    let mut secs = (base_secs * 2f64.powi(attempt.min(62) as i32)).min(BACKOFF_CAP_SECS);
    if let Some(rng) = jitter {
        secs *= rng.gen_range(0.8..=1.2);
    }
    Duration::from_secs_f64(secs.min(BACKOFF_CAP_SECS))
}

/// OpenAI-compatible `POST {endpoint}/chat/completions` client.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    token: Option<Secret>,
    max_retries: u32,
    backoff_base: f64,
    jitter: bool,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("url", &self.url)
            .field("model", &self.model)
            .field("token", &self.token)
            .finish()
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

enum Failure {
    Retry(String),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn from_config(config: &BackendConfig) -> Result<Self, BackendError> {
        let endpoint = config
            .endpoint_url
            .as_deref()
            .ok_or_else(|| BackendError::Config("http backend needs endpoint_url".into()))?;
        let token = match &config.auth_token_env {
            Some(var) => match std::env::var(var) {
                Ok(t) if !t.is_empty() => Some(Secret::new(t)),
                _ => {
                    return Err(BackendError::Config(format!(
                        "environment variable `{var}` holding the auth token is not set"
                    )))
                }
            },
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpBackend {
            client,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            model: config.model_name.clone(),
            token,
            max_retries: config.max_retries,
            backoff_base: config.backoff_base_secs,
            jitter: config.backoff_jitter,
        })
    }

    fn attempt(&self, request: &ChatRequest) -> Result<String, Failure> {
        let body = WireRequest {
            model: &self.model,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            seed: request.seed,
        };
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t.expose());
        }
        let resp = req.send().map_err(|e| Failure::Retry(e.without_url().to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Failure::Retry(e.without_url().to_string()))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Failure::Retry(format!("HTTP {}", status.as_u16())));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(BackendError::Rejected {
                status: status.as_u16(),
                body: text.chars().take(BODY_EXCERPT_CHARS).collect(),
            }));
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(BackendError::Protocol(e.to_string())))?;
        let content = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| Failure::Fatal(BackendError::Protocol("no choices[0].message.content".into())))?;
        finish(content).map_err(Failure::Fatal)
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate()?;
        let mut rng = rand::thread_rng();
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Ok(t) => return Ok(t),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(msg)) => {
                    if attempt >= self.max_retries {
                        return Err(BackendError::Unavailable { attempts: attempt + 1, message: msg });
                    }
                    let delay = backoff_delay(self.backoff_base, attempt, self.jitter.then_some(&mut rng));
                    tracing::warn!(attempt, ?delay, error = %msg, "backend request failed, retrying");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
            }
        }
    }

    fn id(&self) -> String {
        format!("http:{}@{}", self.model, self.url)
    }
}
