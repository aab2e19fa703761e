use std::collections::BTreeMap;

use rayon::prelude::*;

use super::threading::outcome_status;
use super::{RequestRecord, RunCtx, Strategy, TranscriptResult, UtteranceRecord};
use crate::corpus::{CorpusEntry, ThreadLabel};
use crate::llm::CompletionRecord;
use crate::outparse::{parse_block_response, parse_code_response, BlockKind, Payload};
use crate::prompts::{
    render_abcde, render_baseline, AbcdePayload, BaselinePayload, RenderedPrompt, TemplateId,
};
use crate::windowing::{make_window, Feedback, WindowConfig};

pub(crate) fn run_transcript(ctx: &RunCtx<'_>, entry: &CorpusEntry) -> TranscriptResult {
    let threads = ctx.threads.as_ref().and_then(|m| m.get(&entry.transcript.id));
    match ctx.spec.strategy {
        Strategy::Window => window_run(ctx, entry, threads),
        Strategy::AllAtOnce => full_run(ctx, entry, threads),
    }
}

fn gold_of(entry: &CorpusEntry) -> impl Fn(u32) -> Option<String> + '_ {
    |i| entry.gold.abcde.get(&i).map(ToString::to_string)
}

type Step = Result<(RenderedPrompt, CompletionRecord), String>;

/// Windows do not depend on each other's answers, so they run in parallel.
fn window_run(
    ctx: &RunCtx<'_>,
    entry: &CorpusEntry,
    threads: Option<&BTreeMap<u32, ThreadLabel>>,
) -> TranscriptResult {
    let t = &entry.transcript;
    let size = ctx.spec.window.expect("validated window config").size;
    let empty = BTreeMap::new();
    let (cfg, labels) = match threads {
        Some(labels) => (
            WindowConfig {
                size,
                feedback: Feedback::Gold,
            },
            labels,
        ),
        None => (
            WindowConfig {
                size,
                feedback: Feedback::None,
            },
            &empty,
        ),
    };
    let variant = ctx.spec.baseline.unwrap_or(if threads.is_some() {
        TemplateId::AbcdeWindowThreaded
    } else {
        TemplateId::AbcdeWindowPlain
    });
    let steps: Vec<Step> = (1..=t.len() as u32)
        .into_par_iter()
        .map(|i| {
            let w = make_window(t, i, &cfg, labels).map_err(|e| e.to_string())?;
            let prompt = if ctx.spec.baseline.is_some() {
                render_baseline(ctx.templates, variant, BaselinePayload::Window(&w))
            } else {
                render_abcde(
                    ctx.templates,
                    variant,
                    AbcdePayload::Window {
                        window: &w,
                        target_label: labels.get(&i),
                    },
                )
            }
            .map_err(|e| e.to_string())?;
            let c = ctx.client.complete(&prompt).map_err(|e| e.to_string())?;
            Ok((prompt, c))
        })
        .collect();

    let gold = gold_of(entry);
    let mut out = TranscriptResult::default();
    for (i, step) in (1u32..).zip(steps) {
        match step {
            Ok((prompt, c)) => {
                out.requests
                    .push(RequestRecord::new(&prompt, &c, ctx.log_prompts));
                let speaker = prompt.target_speaker().unwrap_or_default();
                let outcome = parse_code_response(&c.response_text, i, speaker, ctx.spec.strictness);
                out.utterances.push(UtteranceRecord {
                    transcript_id: t.id.clone(),
                    index: i,
                    prompt_hash: Some(c.prompt_hash.clone()),
                    status: outcome_status(&outcome),
                    predicted: outcome.ok().map(|p| p.codes.to_string()),
                    gold: gold(i),
                    fed: None,
                });
            }
            Err(e) => {
                out.utterances.push(UtteranceRecord {
                    transcript_id: t.id.clone(),
                    index: i,
                    prompt_hash: None,
                    status: super::PredictionStatus::Aborted { error: e.clone() },
                    predicted: None,
                    gold: gold(i),
                    fed: None,
                });
                out.failure.get_or_insert(e);
            }
        }
    }
    out
}

fn full_run(
    ctx: &RunCtx<'_>,
    entry: &CorpusEntry,
    threads: Option<&BTreeMap<u32, ThreadLabel>>,
) -> TranscriptResult {
    let t = &entry.transcript;
    let gold = gold_of(entry);
    let mut out = TranscriptResult::default();
    let rendered = match ctx.spec.baseline {
        Some(b) => render_baseline(ctx.templates, b, BaselinePayload::Full(t)),
        None => {
            let variant = if threads.is_some() {
                TemplateId::AbcdeFullThreaded
            } else {
                TemplateId::AbcdeFullPlain
            };
            render_abcde(
                ctx.templates,
                variant,
                AbcdePayload::Full {
                    transcript: t,
                    threads,
                },
            )
        }
    };
    let step: Step = rendered
        .map_err(|e| e.to_string())
        .and_then(|p| ctx.client.complete(&p).map(|c| (p, c)).map_err(|e| e.to_string()));
    let (prompt, c) = match step {
        Ok(v) => v,
        Err(e) => {
            out.abort_rest(entry, 1, &e, &gold);
            return out;
        }
    };
    out.requests
        .push(RequestRecord::new(&prompt, &c, ctx.log_prompts));
    let parsed = parse_block_response(
        &c.response_text,
        &prompt.lines,
        BlockKind::Code,
        ctx.spec.strictness,
    );
    for (line, outcome) in prompt.lines.iter().zip(&parsed.outcomes) {
        let predicted = match outcome.ok().map(|l| &l.payload) {
            Some(Payload::Code(codes)) => Some(codes.to_string()),
            _ => None,
        };
        out.utterances.push(UtteranceRecord {
            transcript_id: t.id.clone(),
            index: line.index,
            prompt_hash: Some(c.prompt_hash.clone()),
            status: outcome_status(outcome),
            predicted,
            gold: gold(line.index),
            fed: None,
        });
    }
    out
}
