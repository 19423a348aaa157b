//! Prompting, transport and parsing for the two generative roles (explained
//! classifier and blank filler).
//!
//! A [`Gateway`] wraps a [`Backend`] with a content-addressed response
//! cache, a retry policy for transient failures and a response size cap.
//! Backends are either an OpenAI-compatible HTTP endpoint ([`HttpBackend`])
//! or a scripted [`MockBackend`].

mod cache;
mod http;
mod mock;
mod parse;
mod prompt;

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Label12;

pub use cache::{CacheEntry, ResponseCache};
pub(crate) use http::post_json;
#[cfg(test)]
pub(crate) use http::test_server as http_test_server;
pub use http::HttpBackend;
pub use mock::{MockBackend, MockEntry, MockMatch};
pub use parse::{parse_classifier_output, parse_filler_output, ParsedClassifier};
pub use prompt::{
    build_classifier_prompt, build_filler_prompt, render_classifier_line, render_classifier_output, MASK_TOKEN,
};

/// Environment variable holding the bearer credential for HTTP backends.
pub const API_KEY_ENV: &str = "POLIFILTER_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempt(s): {last}")]
    BackendUnavailable { attempts: usize, last: String },
    #[error("authentication rejected: {0}")]
    AuthFailure(String),
    #[error("response of {bytes} bytes exceeds the {cap}-byte cap")]
    ResponseTooLong { bytes: usize, cap: usize },
    #[error("mock script has no completion for role {role} prompt sha256 {prompt_sha256}")]
    Unscripted { role: Role, prompt_sha256: String },
    #[error("invalid backend response: {0}")]
    InvalidResponse(String),
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
    #[error("text contains no {MASK_TOKEN} token")]
    NoMaskToken,
    #[error("text contains {0} {MASK_TOKEN} tokens, expected one")]
    MultipleMaskTokens(usize),
    #[error("generation is empty")]
    EmptyGeneration,
    #[error("cache failure: {0}")]
    Cache(String),
    #[error("mock script: {0}")]
    Script(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    ExplainedClassifier,
    BlankFiller,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::ExplainedClassifier => "explained_classifier",
            Role::BlankFiller => "blank_filler",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub role: Role,
    pub prompt: String,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
}

impl GenerationRequest {
    pub fn new(
        role: Role,
        prompt: impl Into<String>,
        max_new_tokens: u32,
        temperature: f64,
        stop_sequences: Vec<String>,
    ) -> Result<Self, GatewayError> {
        let prompt = prompt.into();
        if prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        if max_new_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_new_tokens must be >= 1".into()));
        }
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(GatewayError::InvalidRequest(format!("temperature {temperature}")));
        }
        Ok(GenerationRequest {
            role,
            prompt,
            max_new_tokens,
            temperature,
            stop_sequences,
        })
    }

    pub fn prompt_sha256(&self) -> String {
        sha256_hex(self.prompt.as_bytes())
    }

    pub fn keyed(&self, model: &str) -> KeyedRequest {
        KeyedRequest {
            role: self.role,
            prompt: self.prompt.clone(),
            max_new_tokens: self.max_new_tokens,
            temperature: self.temperature,
            stop_sequences: self.stop_sequences.clone(),
            model: model.to_string(),
        }
    }
}

/// Everything that determines a completion: the request plus the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyedRequest {
    pub role: Role,
    pub prompt: String,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
    pub model: String,
}

impl KeyedRequest {
    pub fn key(&self) -> CacheKey {
        CacheKey(sha256_hex(&serde_json::to_vec(self).expect("request serializes")))
    }
}

/// SHA-256 digest (hex) of a [`KeyedRequest`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Decoding parameters applied to every request of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoding {
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding {
            max_new_tokens: 512,
            temperature: 0.0,
            stop_sequences: vec!["\n\n".to_string()],
        }
    }
}

impl Decoding {
    pub fn request(&self, role: Role, prompt: impl Into<String>) -> Result<GenerationRequest, GatewayError> {
        GenerationRequest::new(
            role,
            prompt,
            self.max_new_tokens,
            self.temperature,
            self.stop_sequences.clone(),
        )
    }
}

/// Failure reported by a backend for a single attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendError {
    /// Worth retrying: connection problems, rate limits, 5xx.
    Transient(String),
    Auth(String),
    TooLong {
        bytes: usize,
        cap: usize,
    },
    Unscripted {
        role: Role,
        prompt_sha256: String,
    },
    Fatal(String),
}

/// A text-generation service.
pub trait Backend: Send + Sync {
    /// Identifier folded into cache keys.
    fn model_id(&self) -> String;
    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: usize,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

/// Call counters for one gateway.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GatewayStats {
    pub backend_calls: usize,
    pub cache_hits: usize,
}

pub struct Gateway {
    backend: Box<dyn Backend>,
    model_id: String,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    response_cap: usize,
    decoding: Decoding,
    backend_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("model_id", &self.model_id)
            .field("cache", &self.cache)
            .field("retry", &self.retry)
            .field("response_cap", &self.response_cap)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        let model_id = backend.model_id();
        Gateway {
            backend,
            model_id,
            cache: None,
            retry: RetryPolicy::default(),
            response_cap: 1 << 20,
            decoding: Decoding::default(),
            backend_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_response_cap(mut self, bytes: usize) -> Self {
        self.response_cap = bytes;
        self
    }

    pub fn with_decoding(mut self, decoding: Decoding) -> Self {
        self.decoding = decoding;
        self
    }

    pub fn decoding(&self) -> &Decoding {
        &self.decoding
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            backend_calls: self.backend_calls.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
        }
    }

    /// Raw completion for `request`, served from the cache when possible.
    pub fn generate(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        let keyed = request.keyed(&self.model_id);
        let key = keyed.key();
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key, &keyed) {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(hit);
            }
        }
        let completion = self.call_with_retries(request)?;
        if completion.len() > self.response_cap {
            return Err(GatewayError::ResponseTooLong {
                bytes: completion.len(),
                cap: self.response_cap,
            });
        }
        if let Some(cache) = &self.cache {
            cache.put(&key, &keyed, &completion)?;
        }
        Ok(completion)
    }

    /// Builds a request with this gateway's decoding parameters and runs it.
    pub fn generate_prompt(&self, role: Role, prompt: impl Into<String>) -> Result<String, GatewayError> {
        let request = self.decoding.request(role, prompt)?;
        self.generate(&request)
    }

    fn call_with_retries(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        with_retries(&self.retry, || {
            self.backend_calls.fetch_add(1, Ordering::Relaxed);
            self.backend.complete(request)
        })
    }
}

/// Runs `attempt` until it succeeds, fails permanently, or transient
/// failures exhaust `policy`.
pub fn with_retries<T>(
    policy: &RetryPolicy,
    mut attempt: impl FnMut() -> Result<T, BackendError>,
) -> Result<T, GatewayError> {
    let mut n = 0;
    loop {
        match attempt() {
            Ok(v) => return Ok(v),
            Err(BackendError::Transient(msg)) => {
                if n >= policy.max_retries {
                    return Err(GatewayError::BackendUnavailable {
                        attempts: n + 1,
                        last: msg,
                    });
                }
                let delay = policy.initial_backoff.saturating_mul(1 << n.min(16));
                log::warn!(
                    "transient backend failure (attempt {}): {msg}; retrying in {delay:?}",
                    n + 1
                );
                std::thread::sleep(delay);
                n += 1;
            }
            Err(BackendError::Auth(msg)) => return Err(GatewayError::AuthFailure(msg)),
            Err(BackendError::TooLong { bytes, cap }) => return Err(GatewayError::ResponseTooLong { bytes, cap }),
            Err(BackendError::Unscripted { role, prompt_sha256 }) => {
                return Err(GatewayError::Unscripted { role, prompt_sha256 })
            }
            Err(BackendError::Fatal(msg)) => return Err(GatewayError::InvalidResponse(msg)),
        }
    }
}

/// Prediction of the explained classifier for one paragraph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReasonedPrediction {
    pub paragraph_id: String,
    pub label: Label12,
    pub reason: String,
    pub raw_generation: String,
}

/// Blank-filler output for one masked reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refill {
    pub paragraph_id: String,
    pub label: Label12,
    pub refill_text: String,
}
