//! Chat-completion client for OpenAI-compatible endpoints.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{excerpt, Backend, BackendError, Completion, TokenUsage};

/// Environment variable read for the API key unless configured otherwise.
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 4, initial_backoff: Duration::from_millis(500), max_backoff: Duration::from_secs(8) }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, doubling from `initial_backoff`.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.saturating_sub(1));
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".to_string(),
            model: "gpt-3.5-turbo".to_string(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            temperature: 0.0,
            max_output_tokens: 4096,
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
        }
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

enum Attempt {
    Done(Result<Completion, BackendError>),
    Retry(BackendError),
}

impl HttpBackend {
    /// Reads the key from `config.api_key_env`. Fails with `Auth` if it is unset or empty.
    pub fn from_env(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let key = std::env::var(&config.api_key_env).unwrap_or_default();
        Self::with_key(config, key)
    }

    pub fn with_key(config: HttpBackendConfig, api_key: impl Into<String>) -> Result<Self, BackendError> {
        let api_key = api_key.into();
        if api_key.trim().is_empty() {
            return Err(BackendError::Auth(format!("environment variable {} is not set", config.api_key_env)));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { config, api_key, client })
    }

    pub fn config(&self) -> &HttpBackendConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, prompt: &str, number: u32) -> Attempt {
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
            "messages": [{"role": "user", "content": prompt}],
        });
        let response = match self.client.post(self.endpoint()).bearer_auth(&self.api_key).json(&body).send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(BackendError::Timeout { attempts: number }),
            Err(e) if e.is_connect() => return Attempt::Retry(BackendError::Transport(e.to_string())),
            Err(e) => return Attempt::Done(Err(BackendError::Transport(e.to_string()))),
        };
        let status = response.status().as_u16();
        let text = match response.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Retry(BackendError::Timeout { attempts: number }),
            Err(e) => return Attempt::Done(Err(BackendError::Transport(e.to_string()))),
        };
        match status {
            200..=299 => Attempt::Done(parse_completion(prompt, &text)),
            401 | 403 => Attempt::Done(Err(BackendError::Auth(format!("HTTP {status}: {}", excerpt(&text))))),
            429 => Attempt::Retry(BackendError::RateLimited { attempts: number }),
            500..=599 => Attempt::Retry(BackendError::Provider { status, body: excerpt(&text) }),
            _ => Attempt::Done(Err(BackendError::Provider { status, body: excerpt(&text) })),
        }
    }
}

fn parse_completion(prompt: &str, body: &str) -> Result<Completion, BackendError> {
    let parsed: ChatResponse = serde_json::from_str(body).map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
    let text = parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| BackendError::InvalidResponse("no message content in choices[0]".into()))?;
    let usage = match parsed.usage {
        Some(u) => {
            TokenUsage { prompt_tokens: u.prompt_tokens, completion_tokens: u.completion_tokens, estimated: false }
        }
        None => TokenUsage::estimate(prompt, &text),
    };
    Ok(Completion { text, usage })
}

impl Backend for HttpBackend {
    fn infer(&self, prompt: &str) -> Result<Completion, BackendError> {
        if prompt.trim().is_empty() {
            return Err(BackendError::InvalidRequest("empty prompt".into()));
        }
        let attempts = self.config.retry.max_attempts.max(1);
        let mut last = BackendError::Transport("no attempt made".into());
        for number in 1..=attempts {
            match self.attempt(prompt, number) {
                Attempt::Done(result) => return result,
                Attempt::Retry(err) => last = err,
            }
            if number < attempts {
                thread::sleep(self.config.retry.backoff(number));
            }
        }
        Err(last)
    }

    fn label(&self) -> String {
        format!("http:{}", self.config.model)
    }
}
