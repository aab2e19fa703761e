use std::cell::RefCell;
use std::collections::BTreeMap;

use super::{PredictionStatus, RequestRecord, RunCtx, Strategy, TranscriptResult, UtteranceRecord};
use crate::corpus::{CorpusEntry, GoldAnnotations, ThreadLabel, Transcript};
use crate::outparse::{parse_block_response, parse_thread_response, BlockKind, ParseOutcome, Payload};
use crate::prompts::{render_thread_all_at_once, render_thread_window};
use crate::windowing::{window_sequence, Feedback};

pub(crate) fn run_transcript(ctx: &RunCtx<'_>, entry: &CorpusEntry) -> TranscriptResult {
    match ctx.spec.strategy {
        Strategy::Window => window_run(ctx, entry),
        Strategy::AllAtOnce => all_at_once_run(ctx, entry),
    }
}

fn gold_of(entry: &CorpusEntry) -> impl Fn(u32) -> Option<String> + '_ {
    |i| entry.gold.thread.get(&i).map(ToString::to_string)
}

pub(crate) fn outcome_status<T>(outcome: &ParseOutcome<T>) -> PredictionStatus {
    match outcome {
        ParseOutcome::Ok(_) => PredictionStatus::Ok,
        ParseOutcome::Failed { reason, raw } => PredictionStatus::ParseFailed {
            reason: reason.clone(),
            raw: raw.clone(),
        },
    }
}

/// Sequential windows; each prediction is recorded before the next window
/// is built, so context labels are exactly the fed labels of earlier lines.
fn window_run(ctx: &RunCtx<'_>, entry: &CorpusEntry) -> TranscriptResult {
    let cfg = ctx.spec.window.expect("validated window config");
    let t = &entry.transcript;
    let gold = gold_of(entry);
    let mut out = TranscriptResult::default();
    let fed: RefCell<BTreeMap<u32, ThreadLabel>> = RefCell::new(BTreeMap::new());
    let windows = window_sequence(t, cfg, |j| fed.borrow().get(&j).cloned());
    for w in windows {
        let w = match w {
            Ok(w) => w,
            Err(e) => {
                let from = out.utterances.len() as u32 + 1;
                out.abort_rest(entry, from, &e.to_string(), &gold);
                break;
            }
        };
        let i = w.target_index;
        let step = render_thread_window(ctx.templates, &w)
            .map_err(|e| e.to_string())
            .and_then(|p| ctx.client.complete(&p).map(|c| (p, c)).map_err(|e| e.to_string()));
        let (prompt, completion) = match step {
            Ok(v) => v,
            Err(e) => {
                out.abort_rest(entry, i, &e, &gold);
                break;
            }
        };
        out.requests
            .push(RequestRecord::new(&prompt, &completion, ctx.log_prompts));
        let speaker = prompt.target_speaker().unwrap_or_default();
        let outcome = parse_thread_response(&completion.response_text, i, speaker, ctx.spec.strictness);
        let predicted = outcome.ok().map(|p| p.label.clone());
        let fed_label = match cfg.feedback {
            Feedback::SelfFed => Some(predicted.clone().unwrap_or_else(ThreadLabel::new_thread)),
            Feedback::Gold => entry.gold.thread.get(&i).cloned(),
            Feedback::None => None,
        };
        if let Some(label) = &fed_label {
            fed.borrow_mut().insert(i, label.clone());
        }
        out.utterances.push(UtteranceRecord {
            transcript_id: t.id.clone(),
            index: i,
            prompt_hash: Some(completion.prompt_hash.clone()),
            status: outcome_status(&outcome),
            predicted: predicted.map(|l| l.to_string()),
            gold: gold(i),
            fed: fed_label.map(|l| l.to_string()),
        });
    }
    out
}

/// Example transcripts for a target: the pool in order, skipping the target.
pub(crate) fn pick_shots<'a>(ctx: &RunCtx<'a>, target: &str) -> Vec<(&'a Transcript, &'a GoldAnnotations)> {
    let pool: Vec<&CorpusEntry> = if ctx.spec.shot_pool.is_empty() {
        ctx.corpus.entries.iter().collect()
    } else {
        ctx.spec
            .shot_pool
            .iter()
            .filter_map(|id| ctx.corpus.get(id))
            .collect()
    };
    pool.into_iter()
        .filter(|e| e.transcript.id != target)
        .take(ctx.spec.shots)
        .map(|e| (&e.transcript, &e.gold))
        .collect()
}

fn all_at_once_run(ctx: &RunCtx<'_>, entry: &CorpusEntry) -> TranscriptResult {
    let t = &entry.transcript;
    let gold = gold_of(entry);
    let mut out = TranscriptResult::default();
    let shots = pick_shots(ctx, &t.id);
    if shots.len() < ctx.spec.shots {
        out.abort_rest(
            entry,
            1,
            &format!(
                "only {} example transcripts available, {} requested",
                shots.len(),
                ctx.spec.shots
            ),
            &gold,
        );
        return out;
    }
    let step = render_thread_all_at_once(ctx.templates, t, &shots)
        .map_err(|e| e.to_string())
        .and_then(|p| ctx.client.complete(&p).map(|c| (p, c)).map_err(|e| e.to_string()));
    let (prompt, completion) = match step {
        Ok(v) => v,
        Err(e) => {
            out.abort_rest(entry, 1, &e, &gold);
            return out;
        }
    };
    out.requests
        .push(RequestRecord::new(&prompt, &completion, ctx.log_prompts));
    let parsed = parse_block_response(
        &completion.response_text,
        &prompt.lines,
        BlockKind::Thread,
        ctx.spec.strictness,
    );
    for (line, outcome) in prompt.lines.iter().zip(&parsed.outcomes) {
        let predicted = match outcome.ok().map(|l| &l.payload) {
            Some(Payload::Thread(label)) => Some(label.to_string()),
            _ => None,
        };
        out.utterances.push(UtteranceRecord {
            transcript_id: t.id.clone(),
            index: line.index,
            prompt_hash: Some(completion.prompt_hash.clone()),
            status: outcome_status(outcome),
            predicted,
            gold: gold(line.index),
            fed: None,
        });
    }
    out
}
