use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentSpec, RunError};
use crate::llm::{CompletionRecord, ProviderKind};
use crate::outparse::FailReason;
use crate::prompts::{RenderedPrompt, TemplateId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub run_id: String,
    pub provider: ProviderKind,
    pub spec: ExperimentSpec,
}

/// How one utterance's prediction came about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PredictionStatus {
    Ok,
    ParseFailed {
        reason: FailReason,
        raw: String,
    },
    /// No usable response: the request failed or the transcript was aborted.
    Aborted {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub transcript_id: String,
    pub index: u32,
    /// Hash of the prompt that produced this prediction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_hash: Option<String>,
    #[serde(flatten)]
    pub status: PredictionStatus,
    /// Display form of the parsed label; absent when the status is not ok.
    pub predicted: Option<String>,
    pub gold: Option<String>,
    /// Label shown as context for this utterance in later windows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub transcript_id: String,
    pub template_id: TemplateId,
    /// Target utterance for single-line prompts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_index: Option<u32>,
    pub prompt_hash: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub tokens_estimated: bool,
    pub latency_ms: u64,
    pub cached: bool,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

impl RequestRecord {
    pub(crate) fn new(p: &RenderedPrompt, c: &CompletionRecord, keep_prompt: bool) -> Self {
        Self {
            transcript_id: p.transcript_id.clone(),
            template_id: p.template_id,
            target_index: p.target_index(),
            prompt_hash: c.prompt_hash.clone(),
            input_tokens: c.input_tokens,
            output_tokens: c.output_tokens,
            tokens_estimated: c.tokens_estimated,
            latency_ms: c.latency_ms,
            cached: c.cached,
            attempts: c.attempts,
            prompt: keep_prompt.then(|| p.text.clone()),
        }
    }

    pub(crate) fn as_completion(&self, provider: ProviderKind) -> CompletionRecord {
        CompletionRecord {
            prompt_hash: self.prompt_hash.clone(),
            response_text: String::new(),
            input_tokens: self.input_tokens,
            output_tokens: self.output_tokens,
            latency_ms: self.latency_ms,
            provider,
            tokens_estimated: self.tokens_estimated,
            cached: self.cached,
            attempts: self.attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptFailure {
    pub transcript_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_transcripts: usize,
    pub n_records: usize,
    pub n_requests: usize,
    pub n_cached: usize,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub wall_time_ms: u64,
    /// Absent when no pricing was configured for the model.
    pub cost_usd: Option<f64>,
    pub failed_transcripts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(RunHeader),
    Request(RequestRecord),
    Utterance(UtteranceRecord),
    TranscriptFailed(TranscriptFailure),
    Summary(RunSummary),
}

/// Everything one run produced, in transcript order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub header: RunHeader,
    pub requests: Vec<RequestRecord>,
    pub utterances: Vec<UtteranceRecord>,
    pub failures: Vec<TranscriptFailure>,
    pub summary: RunSummary,
}

impl RunLog {
    pub fn run_id(&self) -> &str {
        &self.header.run_id
    }

    pub fn records_for<'a>(
        &'a self,
        transcript_id: &'a str,
    ) -> impl Iterator<Item = &'a UtteranceRecord> + 'a {
        self.utterances
            .iter()
            .filter(move |r| r.transcript_id == transcript_id)
    }

    /// Copy with timing, cache and retry fields zeroed, for comparing runs.
    pub fn without_timing(&self) -> RunLog {
        let mut log = self.clone();
        for r in &mut log.requests {
            r.latency_ms = 0;
            r.cached = false;
            r.attempts = 0;
        }
        log.summary.wall_time_ms = 0;
        log.summary.n_cached = 0;
        log
    }

    pub fn to_jsonl(&self) -> String {
        let mut lines = vec![Line::Header(self.header.clone())];
        lines.extend(self.requests.iter().cloned().map(Line::Request));
        lines.extend(self.utterances.iter().cloned().map(Line::Utterance));
        lines.extend(self.failures.iter().cloned().map(Line::TranscriptFailed));
        lines.push(Line::Summary(self.summary.clone()));
        let mut out = String::new();
        for l in lines {
            out.push_str(&serde_json::to_string(&l).expect("log lines serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_jsonl().as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<RunLog, RunError> {
        let reader = BufReader::new(File::open(path)?);
        let mut header = None;
        let mut summary = None;
        let mut requests = Vec::new();
        let mut utterances = Vec::new();
        let mut failures = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line)
                .map_err(|e| RunError::BadLog(format!("{}:{}: {e}", path.display(), n + 1)))?;
            match parsed {
                Line::Header(h) => header = Some(h),
                Line::Request(r) => requests.push(r),
                Line::Utterance(u) => utterances.push(u),
                Line::TranscriptFailed(f) => failures.push(f),
                Line::Summary(s) => summary = Some(s),
            }
        }
        let header = header.ok_or_else(|| RunError::BadLog(format!("{}: no header", path.display())))?;
        let summary = summary.ok_or_else(|| {
            RunError::BadLog(format!("{}: no summary line, run incomplete", path.display()))
        })?;
        Ok(RunLog {
            header,
            requests,
            utterances,
            failures,
            summary,
        })
    }
}
