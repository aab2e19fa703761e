use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{RunError, RunLog, Task, UtteranceRecord};
use crate::corpus::{Code, CodeSet, Corpus, Subcategory, ThreadLabel};
use crate::metrics::{
    aggregate, binary_code_metrics, evaluate, subcategory_slice, thread_key, AggregateReport, MetricError,
    MetricReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Also score thread labels per utterance subcategory.
    pub subcategories: bool,
    /// Code letter scored for ABCDE runs.
    pub code: Code,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            subcategories: false,
            code: Code::E,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SliceOutcome {
    Ok {
        /// Conversations containing the subcategory.
        n_conversations: usize,
        report: AggregateReport,
    },
    EmptyCategory,
}

/// Scores of one run. Contains no timing, so replays reproduce it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub run_id: String,
    pub condition: String,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<char>,
    pub aggregate: AggregateReport,
    pub per_transcript: BTreeMap<String, MetricReport>,
    pub failed_transcripts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcategories: Option<BTreeMap<String, SliceOutcome>>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn metric_err(tid: &str, e: MetricError) -> RunError {
    RunError::GoldMismatch(format!("{tid}: {e}"))
}

/// Records of one transcript ordered by index, checked to cover `1..=n`.
fn ordered<'a>(log: &'a RunLog, tid: &'a str, n: usize) -> Result<Vec<&'a UtteranceRecord>, RunError> {
    let mut records: Vec<_> = log.records_for(tid).collect();
    records.sort_by_key(|r| r.index);
    let indices: Vec<u32> = records.iter().map(|r| r.index).collect();
    if indices != (1..=n as u32).collect::<Vec<_>>() {
        return Err(RunError::GoldMismatch(format!(
            "{tid}: run has {} records for a {n}-utterance transcript",
            records.len()
        )));
    }
    Ok(records)
}

pub fn evaluate_run(log: &RunLog, corpus: &Corpus, opts: &EvalOptions) -> Result<EvalReport, RunError> {
    let mut order: Vec<&str> = Vec::new();
    for r in &log.utterances {
        if !order.contains(&r.transcript_id.as_str()) {
            order.push(&r.transcript_id);
        }
    }
    if order.is_empty() {
        return Err(RunError::GoldMismatch("run has no utterance records".into()));
    }
    let task = log.header.spec.task;
    let mut per_transcript = BTreeMap::new();
    let mut reports = Vec::new();
    let mut slices: BTreeMap<Subcategory, Vec<MetricReport>> = BTreeMap::new();
    for tid in order {
        let entry = corpus
            .get(tid)
            .ok_or_else(|| RunError::GoldMismatch(format!("no gold for transcript {tid}")))?;
        let records = ordered(log, tid, entry.transcript.len())?;
        let missing = |i: u32| RunError::GoldMismatch(format!("{tid}#{i} has no gold label"));
        let report = match task {
            Task::Threading => {
                let mut gold = Vec::with_capacity(records.len());
                let mut pred = Vec::with_capacity(records.len());
                for r in &records {
                    let g = entry.gold.thread.get(&r.index).ok_or_else(|| missing(r.index))?;
                    gold.push(thread_key(Some(g)));
                    let p = r.predicted.as_deref().and_then(|s| ThreadLabel::parse(s).ok());
                    pred.push(thread_key(p.as_ref()));
                }
                if opts.subcategories {
                    for tag in Subcategory::ALL {
                        match subcategory_slice(&gold, &pred, &entry.gold.subcat, tag) {
                            Ok(rep) => slices.entry(tag).or_default().push(rep),
                            Err(MetricError::EmptyCategory(_)) => {
                                slices.entry(tag).or_default();
                            }
                            Err(e) => return Err(metric_err(tid, e)),
                        }
                    }
                }
                evaluate(&gold, &pred).map_err(|e| metric_err(tid, e))?
            }
            Task::Abcde => {
                let mut gold = Vec::with_capacity(records.len());
                let mut pred = Vec::with_capacity(records.len());
                for r in &records {
                    gold.push(*entry.gold.abcde.get(&r.index).ok_or_else(|| missing(r.index))?);
                    pred.push(r.predicted.as_deref().and_then(|s| CodeSet::parse(s).ok()));
                }
                binary_code_metrics(&gold, &pred, opts.code).map_err(|e| metric_err(tid, e))?
            }
        };
        reports.push(report);
        per_transcript.insert(tid.to_string(), report);
    }
    let subcategories = opts.subcategories.then(|| {
        slices
            .into_iter()
            .map(|(tag, reps)| {
                let outcome = match aggregate(&reps) {
                    Ok(report) => SliceOutcome::Ok {
                        n_conversations: reps.len(),
                        report,
                    },
                    Err(_) => SliceOutcome::EmptyCategory,
                };
                (tag.tag().to_string(), outcome)
            })
            .collect()
    });
    Ok(EvalReport {
        run_id: log.header.run_id.clone(),
        condition: log.header.spec.condition(),
        task,
        code: (task == Task::Abcde).then(|| opts.code.letter()),
        aggregate: aggregate(&reports).map_err(|e| metric_err("run", e))?,
        per_transcript,
        failed_transcripts: log.summary.failed_transcripts.clone(),
        subcategories,
    })
}
