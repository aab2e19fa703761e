use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{LlmError, ModelConfig, Provider, ProviderKind, RawCompletion};
use crate::prompts::RenderedPrompt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay_ms: 500,
            max_delay_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, with jitter in [50%, 100%) of the
    /// exponential step. A server-provided Retry-After takes precedence.
    pub fn delay(&self, attempt: u32, retry_after: Option<Duration>) -> Duration {
        let cap = Duration::from_millis(self.max_delay_ms);
        if let Some(ra) = retry_after {
            return ra.min(cap);
        }
        let step = self
            .base_delay_ms
            .saturating_mul(1u64 << attempt.saturating_sub(1).min(20))
            .min(self.max_delay_ms);
        let jitter: f64 = rand::rng().random_range(0.5..1.0);
        Duration::from_millis((step as f64 * jitter) as u64)
    }
}

/// OpenAI-compatible chat completions over HTTP(S).
pub struct HttpProvider {
    agent: ureq::Agent,
    retry: RetryPolicy,
    api_key: Option<String>,
}

impl HttpProvider {
    /// Reads the API key from the environment variable named in `model`.
    pub fn from_env(model: &ModelConfig, retry: RetryPolicy) -> Result<Self, LlmError> {
        let key = std::env::var(&model.auth_env).map_err(|_| {
            LlmError::AuthError(format!("environment variable {} is not set", model.auth_env))
        })?;
        Ok(Self::new(model, retry, Some(key)))
    }

    /// `api_key` of None sends no Authorization header (local stub servers).
    pub fn new(model: &ModelConfig, retry: RetryPolicy, api_key: Option<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(model.timeout_secs)))
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
            retry: RetryPolicy {
                max_attempts: retry.max_attempts.max(1),
                ..retry
            },
            api_key,
        }
    }

    fn url(model: &ModelConfig) -> String {
        format!("{}/chat/completions", model.endpoint.trim_end_matches('/'))
    }
}

pub(crate) fn request_body(prompt: &str, model: &ModelConfig) -> Value {
    let mut body = json!({
        "model": model.model_id,
        "messages": [{"role": "user", "content": prompt}],
    });
    if model.fixed_temperature {
        body["max_completion_tokens"] = json!(model.max_output_tokens);
    } else {
        body["temperature"] = json!(model.temperature);
        body["max_tokens"] = json!(model.max_output_tokens);
    }
    body
}

fn parse_body(body: &str) -> Result<(String, Option<u64>, Option<u64>), LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::BadResponse(e.to_string()))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::BadResponse("missing choices[0].message.content".into()))?;
    let usage = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(Value::as_u64);
    Ok((
        text.to_string(),
        usage("prompt_tokens"),
        usage("completion_tokens"),
    ))
}

fn is_context_overflow(body: &str) -> bool {
    let lower = body.to_ascii_lowercase();
    lower.contains("context_length_exceeded") || lower.contains("maximum context length")
}

fn truncate(body: &str) -> String {
    body.chars().take(500).collect()
}

impl Provider for HttpProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Http
    }

    fn call(&self, prompt: &RenderedPrompt, model: &ModelConfig, _: &str) -> Result<RawCompletion, LlmError> {
        let url = Self::url(model);
        let payload = request_body(&prompt.text, model).to_string();
        let started = Instant::now();
        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut req = self.agent.post(&url).header("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let last = attempt >= self.retry.max_attempts;
            let mut resp = match req.send(payload.as_str()) {
                Ok(r) => r,
                Err(e) => {
                    if last {
                        return Err(LlmError::Transport {
                            attempts: attempt,
                            message: e.to_string(),
                        });
                    }
                    log::warn!("request attempt {attempt} failed: {e}");
                    std::thread::sleep(self.retry.delay(attempt, None));
                    continue;
                }
            };
            let status = resp.status().as_u16();
            let retry_after = resp
                .headers()
                .get("retry-after")
                .and_then(|h| h.to_str().ok())
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|s| s.is_finite() && *s >= 0.0)
                .map(Duration::from_secs_f64);
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            match status {
                200..=299 => {
                    let (text, input_tokens, output_tokens) = parse_body(&body)?;
                    return Ok(RawCompletion {
                        text,
                        input_tokens,
                        output_tokens,
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempts: attempt,
                    });
                }
                401 | 403 => return Err(LlmError::AuthError(format!("HTTP {status}: {}", truncate(&body)))),
                400 | 413 if is_context_overflow(&body) => {
                    return Err(LlmError::ContextOverflow(truncate(&body)))
                }
                429 | 500..=599 => {
                    if last {
                        return Err(if status == 429 {
                            LlmError::RateLimited { attempts: attempt }
                        } else {
                            LlmError::Http {
                                status,
                                attempts: attempt,
                                body: truncate(&body),
                            }
                        });
                    }
                    log::warn!("HTTP {status} on attempt {attempt}, retrying");
                    std::thread::sleep(self.retry.delay(attempt, retry_after));
                }
                _ => {
                    return Err(LlmError::Http {
                        status,
                        attempts: attempt,
                        body: truncate(&body),
                    })
                }
            }
        }
    }
}
