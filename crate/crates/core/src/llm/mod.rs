//! Chat-completion providers, the caching client and cost accounting.

mod cost;
mod gate;
mod http;
mod oracle;
mod store;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompts::RenderedPrompt;

pub use cost::{estimate_cost, PricingTable, Rates};
pub use gate::Gate;
pub use http::{HttpProvider, RetryPolicy};
pub use oracle::OracleProvider;
pub use store::{FixtureEntry, ReplayProvider, ResponseStore};

fn default_max_output_tokens() -> u32 {
    1024
}

fn default_endpoint() -> String {
    "https://api.openai.com/v1".to_string()
}

fn default_auth_env() -> String {
    "OPENAI_API_KEY".to_string()
}

fn default_timeout_secs() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_id: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    /// Base URL; `/chat/completions` is appended.
    #[serde(default = "default_endpoint")]
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_auth_env")]
    pub auth_env: String,
    /// Models that reject a temperature parameter; the field is omitted.
    #[serde(default)]
    pub fixed_temperature: bool,
    /// Prompts whose estimated size plus the output budget exceeds this are
    /// refused before sending.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_limit_tokens: Option<u64>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

impl ModelConfig {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            temperature: 0.0,
            max_output_tokens: default_max_output_tokens(),
            endpoint: default_endpoint(),
            auth_env: default_auth_env(),
            fixed_temperature: false,
            context_limit_tokens: None,
            timeout_secs: default_timeout_secs(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.model_id.trim().is_empty() {
            return Err(LlmError::InvalidConfig("model_id is empty".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(LlmError::InvalidConfig(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(LlmError::InvalidConfig(
                "max_output_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Http,
    Replay,
    Oracle,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Http => "http",
            ProviderKind::Replay => "replay",
            ProviderKind::Oracle => "oracle",
        })
    }
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(ProviderKind::Http),
            "replay" => Ok(ProviderKind::Replay),
            "oracle" => Ok(ProviderKind::Oracle),
            other => Err(format!("unknown provider {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("prompt too long for the model context: {0}")]
    ContextOverflow(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("no replay fixture for prompt {0}")]
    FixtureMiss(String),
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("HTTP {status} after {attempts} attempt(s): {body}")]
    Http {
        status: u16,
        attempts: u32,
        body: String,
    },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("no pricing for model {0}")]
    UnknownModelPricing(String),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("oracle has no gold for {0}")]
    NoGold(String),
    #[error("response store: {0}")]
    Store(String),
}

/// One completed request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub prompt_hash: String,
    /// Raw model output, unmodified.
    pub response_text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
    pub provider: ProviderKind,
    /// Token counts were estimated from character length.
    #[serde(default)]
    pub tokens_estimated: bool,
    /// Served from the response cache without calling the provider.
    #[serde(default)]
    pub cached: bool,
    #[serde(default)]
    pub attempts: u32,
}

/// What a provider returns before accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCompletion {
    pub text: String,
    pub input_tokens: Option<u64>,
    pub output_tokens: Option<u64>,
    pub latency_ms: u64,
    pub attempts: u32,
}

pub trait Provider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    fn call(
        &self,
        prompt: &RenderedPrompt,
        model: &ModelConfig,
        prompt_hash: &str,
    ) -> Result<RawCompletion, LlmError>;
}

/// Hex SHA-256 over length-prefixed model id, temperature bits and prompt.
pub fn prompt_hash(model_id: &str, temperature: f64, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update((model_id.len() as u64).to_le_bytes());
    h.update(model_id.as_bytes());
    h.update(temperature.to_bits().to_le_bytes());
    h.update((prompt.len() as u64).to_le_bytes());
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Provider front end: consults the cache, bounds concurrency and fills in
/// token accounting.
pub struct LlmClient {
    provider: Arc<dyn Provider>,
    model: ModelConfig,
    cache: Option<Arc<ResponseStore>>,
    gate: Gate,
}

impl LlmClient {
    pub fn new(provider: Arc<dyn Provider>, model: ModelConfig) -> Result<Self, LlmError> {
        model.validate()?;
        Ok(Self {
            provider,
            model,
            cache: None,
            gate: Gate::new(usize::MAX),
        })
    }

    pub fn with_cache(mut self, cache: Arc<ResponseStore>) -> Self {
        self.cache = Some(cache);
        self
    }

    /// At most `k` provider calls in flight at once.
    pub fn with_concurrency(mut self, k: usize) -> Self {
        self.gate = Gate::new(k.max(1));
        self
    }

    pub fn model(&self) -> &ModelConfig {
        &self.model
    }

    pub fn provider_kind(&self) -> ProviderKind {
        self.provider.kind()
    }

    pub fn hash(&self, prompt: &RenderedPrompt) -> String {
        prompt_hash(&self.model.model_id, self.model.temperature, &prompt.text)
    }

    pub fn complete(&self, prompt: &RenderedPrompt) -> Result<CompletionRecord, LlmError> {
        let hash = self.hash(prompt);
        if let Some(limit) = self.model.context_limit_tokens {
            let needed = estimate_tokens(&prompt.text) + u64::from(self.model.max_output_tokens);
            if needed > limit {
                return Err(LlmError::ContextOverflow(format!(
                    "about {needed} tokens needed, limit {limit}"
                )));
            }
        }
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&hash) {
                let mut record = hit.to_record(&prompt.text, self.provider.kind());
                record.cached = true;
                return Ok(record);
            }
        }
        let started = Instant::now();
        let raw = {
            let _slot = self.gate.acquire();
            self.provider.call(prompt, &self.model, &hash)?
        };
        let latency_ms = if raw.latency_ms > 0 {
            raw.latency_ms
        } else {
            started.elapsed().as_millis() as u64
        };
        let entry = FixtureEntry {
            prompt_hash: hash,
            response_text: raw.text,
            input_tokens: raw.input_tokens,
            output_tokens: raw.output_tokens,
            latency_ms: Some(latency_ms),
        };
        if let Some(cache) = &self.cache {
            cache.insert(entry.clone())?;
        }
        let mut record = entry.to_record(&prompt.text, self.provider.kind());
        record.attempts = raw.attempts;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::{ExpectedLine, ExpectedOutput, TemplateId};
    use std::sync::atomic::{AtomicUsize, Ordering};

    pub(crate) fn prompt(text: &str) -> RenderedPrompt {
        RenderedPrompt {
            template_id: TemplateId::ThreadWindow,
            text: text.to_string(),
            expected_output: ExpectedOutput::ThreadLine,
            transcript_id: "t".into(),
            lines: vec![ExpectedLine {
                index: 1,
                speaker: "A".into(),
            }],
        }
    }

    struct Counting {
        calls: AtomicUsize,
    }

    impl Provider for Counting {
        fn kind(&self) -> ProviderKind {
            ProviderKind::Http
        }

        fn call(&self, p: &RenderedPrompt, _: &ModelConfig, _: &str) -> Result<RawCompletion, LlmError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(RawCompletion {
                text: format!("echo {}", p.text.len()),
                input_tokens: Some(10),
                output_tokens: None,
                latency_ms: 5,
                attempts: 1,
            })
        }
    }

    #[test]
    fn hash_is_stable_and_input_sensitive() {
        let h = prompt_hash("gpt-4.1", 0.0, "hello");
        assert_eq!(h.len(), 64);
        assert_eq!(h, prompt_hash("gpt-4.1", 0.0, "hello"));
        assert_ne!(h, prompt_hash("gpt-4.1", 0.5, "hello"));
        assert_ne!(h, prompt_hash("gpt-4.", 0.0, "1hello"));
        assert_ne!(h, prompt_hash("gpt-4.1", 0.0, "hello "));
        assert_eq!(
            prompt_hash("", 0.0, ""),
            "9d908ecfb6b256def8b49a7c504e6c889c4b0e41fe6ce3e01863dd7b61a20aa0"
        );
    }

    #[test]
    fn cache_hit_skips_provider() {
        let provider = Arc::new(Counting {
            calls: AtomicUsize::new(0),
        });
        let cache = Arc::new(ResponseStore::in_memory());
        let client = LlmClient::new(provider.clone(), ModelConfig::new("m"))
            .unwrap()
            .with_cache(cache.clone());
        let p = prompt("abcdefgh");
        let first = client.complete(&p).unwrap();
        assert!(!first.cached);
        assert!(first.tokens_estimated);
        assert_eq!(first.output_tokens, estimate_tokens("echo 8"));
        let second = client.complete(&p).unwrap();
        assert!(second.cached);
        assert_eq!(second.response_text, first.response_text);
        assert_eq!(provider.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn context_limit_refuses_before_sending() {
        let provider = Arc::new(Counting {
            calls: AtomicUsize::new(0),
        });
        let mut model = ModelConfig::new("m");
        model.context_limit_tokens = Some(1030);
        model.max_output_tokens = 1024;
        let client = LlmClient::new(provider.clone(), model).unwrap();
        assert!(client.complete(&prompt("short")).is_ok());
        assert!(matches!(
            client.complete(&prompt(&"x".repeat(100))),
            Err(LlmError::ContextOverflow(_))
        ));
        assert_eq!(provider.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn config_validation() {
        let mut m = ModelConfig::new("");
        assert!(m.validate().is_err());
        m.model_id = "x".into();
        m.temperature = f64::NAN;
        assert!(m.validate().is_err());
        m.temperature = 0.0;
        assert!(m.validate().is_ok());
        let parsed: ModelConfig =
            serde_json::from_str(r#"{"model_id":"o3-mini","fixed_temperature":true}"#).unwrap();
        assert_eq!(parsed.endpoint, "https://api.openai.com/v1");
        assert!(parsed.fixed_temperature);
    }

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
    }
}
