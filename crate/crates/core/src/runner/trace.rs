use std::collections::BTreeMap;

use super::{RunLog, Strategy, Task};
use crate::corpus::{Corpus, ThreadLabel};
use crate::llm::prompt_hash;
use crate::prompts::{render_thread_window, transcript_lines, TemplateSet};
use crate::windowing::{make_window, Feedback};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceViolation {
    pub transcript_id: String,
    pub index: u32,
    pub detail: String,
}

/// Checks that every logged window prompt of a threading window run equals
/// the prompt rebuilt from the transcript prefix and the labels fed for
/// earlier lines. Under self feedback the fed label is the logged prediction,
/// or `-` where parsing failed. Returns all violations found.
pub fn check_self_feed_trace(log: &RunLog, corpus: &Corpus, templates: &TemplateSet) -> Vec<TraceViolation> {
    let spec = &log.header.spec;
    let mut out = Vec::new();
    let (Task::Threading, Strategy::Window, Some(cfg)) = (spec.task, spec.strategy, spec.window) else {
        out.push(TraceViolation {
            transcript_id: String::new(),
            index: 0,
            detail: "not a threading window run".into(),
        });
        return out;
    };
    let mut by_transcript: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for r in &log.utterances {
        by_transcript.entry(r.transcript_id.as_str()).or_default().push(r);
    }
    for (tid, records) in by_transcript {
        let mut violation = |index: u32, detail: String| {
            out.push(TraceViolation {
                transcript_id: tid.to_string(),
                index,
                detail,
            })
        };
        let Some(entry) = corpus.get(tid) else {
            violation(0, "transcript not in corpus".into());
            continue;
        };
        let mut fed = BTreeMap::new();
        for r in &records {
            let expected = match cfg.feedback {
                Feedback::SelfFed if r.prompt_hash.is_some() => Some(
                    r.predicted
                        .as_deref()
                        .and_then(|p| ThreadLabel::parse(p).ok())
                        .unwrap_or_else(ThreadLabel::new_thread),
                ),
                Feedback::Gold => entry.gold.thread.get(&r.index).cloned(),
                _ => None,
            };
            let logged = r.fed.as_deref().and_then(|f| ThreadLabel::parse(f).ok());
            if logged != expected {
                violation(
                    r.index,
                    format!(
                        "fed label {:?} but expected {:?}",
                        r.fed,
                        expected.as_ref().map(ToString::to_string)
                    ),
                );
            }
            if let Some(label) = expected {
                fed.insert(r.index, label);
            }
        }
        for req in log.requests.iter().filter(|q| q.transcript_id == tid) {
            let Some(i) = req.target_index else {
                violation(0, "window request without a target".into());
                continue;
            };
            // only labels of earlier lines may shape the prompt for i
            let prefix: BTreeMap<u32, ThreadLabel> = fed.range(..i).map(|(k, v)| (*k, v.clone())).collect();
            let rebuilt = make_window(&entry.transcript, i, &cfg, &prefix)
                .map_err(|e| e.to_string())
                .and_then(|w| render_thread_window(templates, &w).map_err(|e| e.to_string()));
            let prompt = match rebuilt {
                Ok(p) => p,
                Err(e) => {
                    violation(i, format!("cannot rebuild prompt: {e}"));
                    continue;
                }
            };
            let hash = prompt_hash(&spec.model.model_id, spec.model.temperature, &prompt.text);
            if hash != req.prompt_hash {
                violation(
                    i,
                    "logged prompt differs from the prompt rebuilt from earlier labels".into(),
                );
            }
            if let Some(text) = &req.prompt {
                let shown: Vec<(u32, Option<String>)> = transcript_lines(text)
                    .unwrap_or_default()
                    .into_iter()
                    .filter(|l| l.index < i)
                    .map(|l| (l.index, l.label.map(|x| x.canonical())))
                    .collect();
                let wanted: Vec<(u32, Option<String>)> = prefix
                    .range(cfg.start(i)..)
                    .map(|(k, v)| (*k, Some(v.canonical())))
                    .collect();
                if cfg.feedback != Feedback::None && shown != wanted {
                    violation(
                        i,
                        format!("context labels {shown:?} differ from fed labels {wanted:?}"),
                    );
                }
            }
        }
    }
    out
}
