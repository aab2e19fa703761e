//! Experiment orchestration: specs, run logs, evaluation and reports.

mod abcde;
mod eval;
mod log;
mod threading;
mod trace;
mod tradeoff;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusEntry, ThreadLabel};
use crate::llm::{estimate_cost, LlmClient, LlmError, ModelConfig, PricingTable, Provider, ResponseStore};
use crate::outparse::Strictness;
use crate::prompts::{PromptError, TemplateError, TemplateId, TemplateSet, MAX_SHOTS};
use crate::windowing::{Feedback, WindowConfig, WindowError};

pub use eval::{evaluate_run, EvalOptions, EvalReport, SliceOutcome};
pub use log::{
    PredictionStatus, RequestRecord, RunHeader, RunLog, RunSummary, TranscriptFailure, UtteranceRecord,
};
pub use trace::{check_self_feed_trace, TraceViolation};
pub use tradeoff::{tradeoff_report, Axis, HumanBaseline, TradeoffRow, TradeoffTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Threading,
    Abcde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    AllAtOnce,
    Window,
}

/// Where ABCDE prompts get thread labels from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThreadSource {
    None,
    Human,
    /// Predictions of a completed threading run, by run id.
    LlmRun(String),
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Threading => "threading",
            Task::Abcde => "abcde",
        })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::AllAtOnce => "all_at_once",
            Strategy::Window => "window",
        })
    }
}

impl fmt::Display for ThreadSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThreadSource::None => f.write_str("none"),
            ThreadSource::Human => f.write_str("human"),
            ThreadSource::LlmRun(id) => write!(f, "llm:{id}"),
        }
    }
}

impl std::str::FromStr for ThreadSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ThreadSource::None),
            "human" => Ok(ThreadSource::Human),
            other => match other.strip_prefix("llm:") {
                Some(id) if !id.is_empty() => Ok(ThreadSource::LlmRun(id.to_string())),
                _ => Err(format!(
                    "thread source must be none, human or llm:<run_id>, got {other:?}"
                )),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub task: Task,
    pub strategy: Strategy,
    /// Labeled example transcripts (threading, all-at-once only).
    #[serde(default)]
    pub shots: usize,
    /// Transcripts to draw shots from, in order. Defaults to corpus order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shot_pool: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread_source: Option<ThreadSource>,
    /// Prior-work coding prompt used instead of the ABCDE templates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<TemplateId>,
    pub model: ModelConfig,
    /// Transcript ids to run; empty means the whole corpus.
    #[serde(default)]
    pub transcripts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_dir: Option<PathBuf>,
    #[serde(default)]
    pub strictness: Strictness,
}

impl ExperimentSpec {
    pub fn threading_window(model: ModelConfig, size: usize) -> Self {
        Self {
            task: Task::Threading,
            strategy: Strategy::Window,
            shots: 0,
            shot_pool: Vec::new(),
            window: Some(WindowConfig {
                size,
                feedback: Feedback::SelfFed,
            }),
            thread_source: None,
            baseline: None,
            model,
            transcripts: Vec::new(),
            template_dir: None,
            strictness: Strictness::default(),
        }
    }

    pub fn threading_all_at_once(model: ModelConfig, shots: usize) -> Self {
        Self {
            strategy: Strategy::AllAtOnce,
            shots,
            window: None,
            ..Self::threading_window(model, 2)
        }
    }

    pub fn abcde(model: ModelConfig, strategy: Strategy, size: usize, source: ThreadSource) -> Self {
        Self {
            task: Task::Abcde,
            strategy,
            window: (strategy == Strategy::Window).then_some(WindowConfig {
                size,
                feedback: Feedback::None,
            }),
            thread_source: Some(source),
            ..Self::threading_window(model, size)
        }
    }

    pub fn thread_source(&self) -> &ThreadSource {
        self.thread_source.as_ref().unwrap_or(&ThreadSource::None)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::InvalidSpec(m));
        self.model.validate()?;
        match (self.strategy, &self.window) {
            (Strategy::Window, None) => return bad("window strategy needs a window config".into()),
            (Strategy::Window, Some(w)) => w.check()?,
            (Strategy::AllAtOnce, Some(_)) => {
                return bad("all_at_once strategy takes no window config".into())
            }
            (Strategy::AllAtOnce, None) => {}
        }
        if self.shots > 0 && (self.task, self.strategy) != (Task::Threading, Strategy::AllAtOnce) {
            return bad("shots apply to all-at-once threading only".into());
        }
        if self.shots > MAX_SHOTS {
            return bad(format!("at most {MAX_SHOTS} shots, got {}", self.shots));
        }
        match self.task {
            Task::Threading => {
                if self.thread_source.is_some() || self.baseline.is_some() {
                    return bad("thread_source and baseline apply to abcde runs only".into());
                }
            }
            Task::Abcde => {
                if let Some(b) = self.baseline {
                    let wanted = match b {
                        TemplateId::BaselineLee | TemplateId::BaselineQamar => Strategy::Window,
                        TemplateId::BaselineMartinenghi => Strategy::AllAtOnce,
                        other => return bad(format!("{other} is not a baseline template")),
                    };
                    if wanted != self.strategy {
                        return bad(format!("baseline {b} needs the {wanted} strategy"));
                    }
                    if *self.thread_source() != ThreadSource::None {
                        return bad("baseline prompts take no thread labels".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Short human-readable name of the experimental condition.
    pub fn condition(&self) -> String {
        let mut parts = vec![self.task.to_string()];
        match self.baseline {
            Some(b) => parts.push(b.to_string()),
            None => parts.push(self.strategy.to_string()),
        }
        if let Some(w) = &self.window {
            parts.push(format!("n={}", w.size));
            if self.task == Task::Threading {
                parts.push(format!("feedback={}", w.feedback));
            }
        }
        if self.task == Task::Threading && self.strategy == Strategy::AllAtOnce {
            parts.push(format!("shots={}", self.shots));
        }
        if self.task == Task::Abcde && self.baseline.is_none() {
            parts.push(format!("threads={}", self.thread_source()));
        }
        parts.push(self.model.model_id.clone());
        parts.join(" ")
    }
}

/// Named specs run together, e.g. a strategy by window-size grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub runs: Vec<MatrixEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub name: String,
    pub spec: ExperimentSpec,
}

impl Matrix {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let m: Matrix = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        for e in &m.runs {
            e.spec.validate()?;
        }
        Ok(m)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("transcript {0} is not in the corpus")]
    UnknownTranscript(String),
    #[error("thread source has no label for {transcript}#{index}")]
    MissingThreadSource { transcript: String, index: u32 },
    #[error("threading run {0} not found or not a threading run")]
    ThreadRunNotFound(String),
    #[error("gold does not match run: {0}")]
    GoldMismatch(String),
    #[error("malformed run log: {0}")]
    BadLog(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Content address of a run: the spec plus the provider kind.
pub fn run_id(spec: &ExperimentSpec, provider: crate::llm::ProviderKind) -> String {
    let canonical = serde_json::to_string(&(provider, spec)).expect("spec serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    hex::encode(digest)[..16].to_string()
}

/// Results for one transcript, merged into the log in transcript order.
#[derive(Debug, Default)]
pub(crate) struct TranscriptResult {
    pub requests: Vec<RequestRecord>,
    pub utterances: Vec<UtteranceRecord>,
    pub failure: Option<String>,
}

impl TranscriptResult {
    /// Marks utterances `from..=n` as aborted with `error`.
    pub(crate) fn abort_rest(
        &mut self,
        entry: &CorpusEntry,
        from: u32,
        error: &str,
        gold: impl Fn(u32) -> Option<String>,
    ) {
        for i in from..=entry.transcript.len() as u32 {
            self.utterances.push(UtteranceRecord {
                transcript_id: entry.transcript.id.clone(),
                index: i,
                prompt_hash: None,
                status: PredictionStatus::Aborted {
                    error: error.to_string(),
                },
                predicted: None,
                gold: gold(i),
                fed: None,
            });
        }
        self.failure.get_or_insert_with(|| error.to_string());
    }
}

/// Thread labels per transcript id, fed into ABCDE prompts.
type ThreadMap = BTreeMap<String, BTreeMap<u32, ThreadLabel>>;

pub(crate) struct RunCtx<'a> {
    pub spec: &'a ExperimentSpec,
    pub corpus: &'a Corpus,
    pub templates: &'a TemplateSet,
    pub client: &'a LlmClient,
    pub log_prompts: bool,
    /// Per-transcript thread labels for ABCDE prompts.
    pub threads: Option<ThreadMap>,
}

pub struct Runner {
    corpus: Arc<Corpus>,
    templates: TemplateSet,
    provider: Arc<dyn Provider>,
    cache: Option<Arc<ResponseStore>>,
    runs_dir: Option<PathBuf>,
    pricing: Option<PricingTable>,
    transcript_concurrency: usize,
    request_concurrency: usize,
    log_prompts: bool,
}

impl Runner {
    pub fn new(corpus: Arc<Corpus>, provider: Arc<dyn Provider>) -> Self {
        Self {
            corpus,
            templates: TemplateSet::builtin(),
            provider,
            cache: None,
            runs_dir: None,
            pricing: None,
            transcript_concurrency: 4,
            request_concurrency: 8,
            log_prompts: false,
        }
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_cache(mut self, cache: Arc<ResponseStore>) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Run logs are written to `<dir>/<run_id>/log.jsonl`.
    pub fn with_runs_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.runs_dir = Some(dir.into());
        self
    }

    pub fn with_pricing(mut self, pricing: PricingTable) -> Self {
        self.pricing = Some(pricing);
        self
    }

    pub fn with_concurrency(mut self, transcripts: usize, requests: usize) -> Self {
        self.transcript_concurrency = transcripts.max(1);
        self.request_concurrency = requests.max(1);
        self
    }

    /// Keep full prompt text in request records.
    pub fn with_prompt_logging(mut self, on: bool) -> Self {
        self.log_prompts = on;
        self
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn run_id(&self, spec: &ExperimentSpec) -> String {
        run_id(spec, self.provider.kind())
    }

    pub fn log_path(&self, run_id: &str) -> Option<PathBuf> {
        self.runs_dir.as_ref().map(|d| d.join(run_id).join("log.jsonl"))
    }

    pub fn load_run(&self, run_id: &str) -> Result<RunLog, RunError> {
        let path = self
            .log_path(run_id)
            .ok_or_else(|| RunError::ThreadRunNotFound(run_id.to_string()))?;
        if !path.exists() {
            return Err(RunError::ThreadRunNotFound(run_id.to_string()));
        }
        RunLog::read(&path)
    }

    pub fn run_threading(&self, spec: &ExperimentSpec) -> Result<RunLog, RunError> {
        if spec.task != Task::Threading {
            return Err(RunError::InvalidSpec("not a threading spec".into()));
        }
        self.run(spec)
    }

    pub fn run_abcde(&self, spec: &ExperimentSpec) -> Result<RunLog, RunError> {
        if spec.task != Task::Abcde {
            return Err(RunError::InvalidSpec("not an abcde spec".into()));
        }
        self.run(spec)
    }

    fn selected(&self, spec: &ExperimentSpec) -> Result<Vec<&CorpusEntry>, RunError> {
        if spec.transcripts.is_empty() {
            return Ok(self.corpus.entries.iter().collect());
        }
        spec.transcripts
            .iter()
            .map(|id| {
                self.corpus
                    .get(id)
                    .ok_or_else(|| RunError::UnknownTranscript(id.clone()))
            })
            .collect()
    }

    fn resolve_threads(
        &self,
        spec: &ExperimentSpec,
        entries: &[&CorpusEntry],
    ) -> Result<Option<ThreadMap>, RunError> {
        match spec.thread_source() {
            ThreadSource::None => Ok(None),
            ThreadSource::Human => Ok(Some(
                entries
                    .iter()
                    .map(|e| (e.transcript.id.clone(), e.gold.thread.clone()))
                    .collect(),
            )),
            ThreadSource::LlmRun(id) => {
                let log = self.load_run(id)?;
                if log.header.spec.task != Task::Threading {
                    return Err(RunError::ThreadRunNotFound(id.clone()));
                }
                let mut out = BTreeMap::new();
                for e in entries {
                    let tid = &e.transcript.id;
                    let by_index: BTreeMap<u32, &UtteranceRecord> =
                        log.records_for(tid).map(|r| (r.index, r)).collect();
                    let mut labels = BTreeMap::new();
                    for i in 1..=e.transcript.len() as u32 {
                        let rec = by_index.get(&i).ok_or_else(|| RunError::MissingThreadSource {
                            transcript: tid.clone(),
                            index: i,
                        })?;
                        let label = rec
                            .predicted
                            .as_deref()
                            .and_then(|p| ThreadLabel::parse_for(p, i).ok())
                            .unwrap_or_else(|| {
                                ::log::warn!("{tid}#{i}: threading run {id} has no label, using -");
                                ThreadLabel::new_thread()
                            });
                        labels.insert(i, label);
                    }
                    out.insert(tid.clone(), labels);
                }
                Ok(Some(out))
            }
        }
    }

    pub fn run(&self, spec: &ExperimentSpec) -> Result<RunLog, RunError> {
        spec.validate()?;
        let started = Instant::now();
        let entries = self.selected(spec)?;
        let templates = match &spec.template_dir {
            Some(dir) => TemplateSet::from_dir(dir)?,
            None => self.templates.clone(),
        };
        let mut client = LlmClient::new(self.provider.clone(), spec.model.clone())?
            .with_concurrency(self.request_concurrency);
        if let Some(cache) = &self.cache {
            client = client.with_cache(cache.clone());
        }
        let ctx = RunCtx {
            spec,
            corpus: &self.corpus,
            templates: &templates,
            client: &client,
            log_prompts: self.log_prompts,
            threads: self.resolve_threads(spec, &entries)?,
        };
        let job = |e: &&CorpusEntry| match spec.task {
            Task::Threading => threading::run_transcript(&ctx, e),
            Task::Abcde => abcde::run_transcript(&ctx, e),
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.transcript_concurrency)
            .build()
            .map_err(|e| RunError::InvalidSpec(format!("thread pool: {e}")))?;
        let results: Vec<TranscriptResult> = pool.install(|| entries.par_iter().map(job).collect());

        let id = self.run_id(spec);
        let mut log = RunLog {
            header: RunHeader {
                run_id: id.clone(),
                provider: self.provider.kind(),
                spec: spec.clone(),
            },
            requests: Vec::new(),
            utterances: Vec::new(),
            failures: Vec::new(),
            summary: RunSummary {
                n_transcripts: entries.len(),
                n_records: 0,
                n_requests: 0,
                n_cached: 0,
                input_tokens: 0,
                output_tokens: 0,
                wall_time_ms: 0,
                cost_usd: None,
                failed_transcripts: Vec::new(),
            },
        };
        for (e, r) in entries.iter().zip(results) {
            if let Some(error) = r.failure {
                ::log::warn!("transcript {} failed: {error}", e.transcript.id);
                log.failures.push(TranscriptFailure {
                    transcript_id: e.transcript.id.clone(),
                    error,
                });
            }
            log.requests.extend(r.requests);
            log.utterances.extend(r.utterances);
        }
        let s = &mut log.summary;
        s.n_records = log.utterances.len();
        s.n_requests = log.requests.len();
        s.n_cached = log.requests.iter().filter(|r| r.cached).count();
        s.input_tokens = log.requests.iter().map(|r| r.input_tokens).sum();
        s.output_tokens = log.requests.iter().map(|r| r.output_tokens).sum();
        s.failed_transcripts = log.failures.iter().map(|f| f.transcript_id.clone()).collect();
        s.cost_usd = self.pricing.as_ref().and_then(|p| {
            let completions: Vec<_> = log
                .requests
                .iter()
                .map(|r| r.as_completion(log.header.provider))
                .collect();
            estimate_cost(&completions, p, &spec.model.model_id).ok()
        });
        s.wall_time_ms = started.elapsed().as_millis() as u64;
        if let Some(path) = self.log_path(&id) {
            log.write(&path)?;
        }
        Ok(log)
    }
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
