#![allow(dead_code)]

pub mod golden;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use threadcode::corpus::Corpus;
use threadcode::llm::{LlmError, ModelConfig, OracleProvider, Provider, ProviderKind, RawCompletion};
use threadcode::prompts::{ExpectedOutput, RenderedPrompt};

pub fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn corpus() -> Arc<Corpus> {
    let c = Corpus::load_dir(&workspace().join("data/corpus")).expect("bundled corpus loads");
    c.check().expect("bundled corpus is complete");
    Arc::new(c)
}

pub fn model() -> ModelConfig {
    ModelConfig::new("gpt-4.1")
}

/// Oracle whose answers are degraded by a hash-derived rule: some answers
/// are unparseable, some claim a new thread, the rest are gold.
pub struct NoisyProvider {
    oracle: OracleProvider,
}

impl NoisyProvider {
    pub fn new(corpus: Arc<Corpus>) -> Self {
        Self {
            oracle: OracleProvider::new(corpus),
        }
    }
}

impl Provider for NoisyProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Oracle
    }

    fn call(&self, p: &RenderedPrompt, m: &ModelConfig, hash: &str) -> Result<RawCompletion, LlmError> {
        let mut raw = self.oracle.call(p, m, hash)?;
        let line = |i: usize| &p.lines[i];
        raw.text = match hash.as_bytes()[0] {
            b'0'..=b'2' => "I am not sure how to label this.".to_string(),
            b'3'..=b'5' if p.expected_output.is_thread() => (0..p.lines.len())
                .map(|i| format!("{} {} [respond line = -]", line(i).index, line(i).speaker))
                .collect::<Vec<_>>()
                .join("\n"),
            b'3'..=b'5' if !matches!(p.expected_output, ExpectedOutput::ThreadLine) => (0..p.lines.len())
                .map(|i| format!("{} {} [E]", line(i).index, line(i).speaker))
                .collect::<Vec<_>>()
                .join("\n"),
            _ => raw.text,
        };
        raw.input_tokens = Some(p.text.len() as u64 / 4);
        raw.output_tokens = Some(raw.text.len() as u64 / 4);
        Ok(raw)
    }
}

/// Wraps a provider and fails every call after the first `budget`.
pub struct Interrupting<P> {
    pub inner: P,
    pub budget: usize,
    pub calls: AtomicUsize,
}

impl<P: Provider> Interrupting<P> {
    pub fn new(inner: P, budget: usize) -> Self {
        Self {
            inner,
            budget,
            calls: AtomicUsize::new(0),
        }
    }
}

impl<P: Provider> Provider for Interrupting<P> {
    fn kind(&self) -> ProviderKind {
        self.inner.kind()
    }

    fn call(&self, p: &RenderedPrompt, m: &ModelConfig, hash: &str) -> Result<RawCompletion, LlmError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) >= self.budget {
            return Err(LlmError::Transport {
                attempts: 1,
                message: "connection reset".into(),
            });
        }
        self.inner.call(p, m, hash)
    }
}
