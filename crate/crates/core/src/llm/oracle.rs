use std::sync::Arc;

use super::{LlmError, ModelConfig, Provider, ProviderKind, RawCompletion};
use crate::corpus::Corpus;
use crate::prompts::{ExpectedOutput, RenderedPrompt};

/// Answers every prompt with the gold labels of the lines it asks about,
/// in the exact line syntax the prompts request.
pub struct OracleProvider {
    corpus: Arc<Corpus>,
}

impl OracleProvider {
    pub fn new(corpus: Arc<Corpus>) -> Self {
        Self { corpus }
    }
}

impl Provider for OracleProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Oracle
    }

    fn call(&self, prompt: &RenderedPrompt, _: &ModelConfig, _: &str) -> Result<RawCompletion, LlmError> {
        let entry = self
            .corpus
            .get(&prompt.transcript_id)
            .ok_or_else(|| LlmError::NoGold(format!("transcript {}", prompt.transcript_id)))?;
        let missing =
            |what: &str, i: u32| LlmError::NoGold(format!("{what} label for {}#{i}", prompt.transcript_id));
        let thread = matches!(
            prompt.expected_output,
            ExpectedOutput::ThreadLine | ExpectedOutput::ThreadBlock { .. }
        );
        let mut lines = Vec::with_capacity(prompt.lines.len());
        for l in &prompt.lines {
            let line = if thread {
                let label = entry
                    .gold
                    .thread
                    .get(&l.index)
                    .ok_or_else(|| missing("thread", l.index))?;
                format!("{} {} [respond line = {label}]", l.index, l.speaker)
            } else {
                let codes = entry
                    .gold
                    .abcde
                    .get(&l.index)
                    .ok_or_else(|| missing("code", l.index))?;
                format!("{} {} {codes}", l.index, l.speaker)
            };
            lines.push(line);
        }
        Ok(RawCompletion {
            text: lines.join("\n"),
            input_tokens: None,
            output_tokens: None,
            latency_ms: 0,
            attempts: 1,
        })
    }
}
