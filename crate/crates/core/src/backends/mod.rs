//! Inference backends.
//!
//! Every LWT instruction is one fresh single-turn inference, so the interface
//! is a single blocking call from prompt to assistant text plus token usage.

pub mod decimal;
pub mod http;
pub mod oracle;
pub mod replay;

use std::collections::HashMap;
use std::ops::{Add, AddAssign};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decimal::Decimal;
pub use http::{HttpBackend, HttpBackendConfig, RetryPolicy, DEFAULT_API_KEY_ENV};
pub use oracle::OracleBackend;
pub use replay::{ReplayMode, ReplayStore};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Counts came from [`estimate_tokens`] rather than the provider.
    pub estimated: bool,
}

impl TokenUsage {
    pub fn estimate(prompt: &str, completion: &str) -> Self {
        Self { prompt_tokens: estimate_tokens(prompt), completion_tokens: estimate_tokens(completion), estimated: true }
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
            estimated: self.estimated || rhs.estimated,
        }
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: TokenUsage) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for TokenUsage {
    fn sum<I: Iterator<Item = TokenUsage>>(iter: I) -> TokenUsage {
        iter.fold(TokenUsage::default(), Add::add)
    }
}

/// Offline token estimate: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
}

impl Completion {
    /// A completion whose usage is estimated from the prompt and response text.
    pub fn estimated(prompt: &str, text: impl Into<String>) -> Self {
        let text = text.into();
        let usage = TokenUsage::estimate(prompt, &text);
        Self { text, usage }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("provider returned HTTP {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed provider response: {0}")]
    InvalidResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no elementary pattern matches prompt: {0}")]
    UnrecognizedPattern(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("prompt not in fixture: {0}")]
    FixtureMiss(String),
    #[error("fixture i/o: {0}")]
    Io(String),
}

/// Shortens a prompt for error messages.
pub(crate) fn excerpt(prompt: &str) -> String {
    const MAX: usize = 120;
    let trimmed = prompt.trim();
    if trimmed.chars().count() <= MAX {
        trimmed.to_string()
    } else {
        format!("{}...", trimmed.chars().take(MAX).collect::<String>())
    }
}

/// A single-turn inference service. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    fn infer(&self, prompt: &str) -> Result<Completion, BackendError>;

    /// Short label used in reports.
    fn label(&self) -> String {
        "backend".to_string()
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn infer(&self, prompt: &str) -> Result<Completion, BackendError> {
        (**self).infer(prompt)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn infer(&self, prompt: &str) -> Result<Completion, BackendError> {
        (**self).infer(prompt)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn infer(&self, prompt: &str) -> Result<Completion, BackendError> {
        (**self).infer(prompt)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}

/// Backend built from a closure; usage is estimated.
pub struct FnBackend<F> {
    label: String,
    respond: F,
}

impl<F> FnBackend<F>
where
    F: Fn(&str) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(label: impl Into<String>, respond: F) -> Self {
        Self { label: label.into(), respond }
    }
}

impl<F> Backend for FnBackend<F>
where
    F: Fn(&str) -> Result<String, BackendError> + Send + Sync,
{
    fn infer(&self, prompt: &str) -> Result<Completion, BackendError> {
        (self.respond)(prompt).map(|text| Completion::estimated(prompt, text))
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Caches completions by exact prompt for the lifetime of the wrapper.
pub struct Memoized<B> {
    inner: B,
    cache: Mutex<HashMap<String, Completion>>,
}

impl<B: Backend> Memoized<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, cache: Mutex::new(HashMap::new()) }
    }
}

impl<B: Backend> Backend for Memoized<B> {
    fn infer(&self, prompt: &str) -> Result<Completion, BackendError> {
        if let Some(hit) = self.cache.lock().expect("memo cache poisoned").get(prompt) {
            return Ok(hit.clone());
        }
        let completion = self.inner.infer(prompt)?;
        self.cache.lock().expect("memo cache poisoned").insert(prompt.to_string(), completion.clone());
        Ok(completion)
    }

    fn label(&self) -> String {
        self.inner.label()
    }
}
