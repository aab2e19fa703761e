use std::collections::BTreeMap;

use serde::Deserialize;
use threadcode::corpus::{GoldAnnotations, ThreadLabel, Transcript, Utterance};
use threadcode::prompts::{
    render_abcde, render_baseline, render_thread_all_at_once, render_thread_window, AbcdePayload,
    BaselinePayload, RenderedPrompt, TemplateId, TemplateSet,
};
use threadcode::windowing::{make_window, Feedback, WindowConfig};

#[derive(Deserialize)]
pub struct Input {
    pub transcripts: Vec<FixtureTranscript>,
    pub cases: Vec<Case>,
}

#[derive(Deserialize)]
pub struct FixtureTranscript {
    id: String,
    utterances: Vec<Utterance>,
    thread: BTreeMap<u32, String>,
}

#[derive(Deserialize)]
pub struct Case {
    pub name: String,
    pub template: TemplateId,
    pub transcript: String,
    pub target: Option<u32>,
    pub size: Option<usize>,
    #[serde(default)]
    pub shots: Vec<String>,
}

pub type Data = BTreeMap<String, (Transcript, GoldAnnotations)>;

pub fn load() -> (Input, Data) {
    let raw = std::fs::read_to_string(super::fixtures().join("prompts/input.json")).unwrap();
    let input: Input = serde_json::from_str(&raw).unwrap();
    let mut out = BTreeMap::new();
    for t in &input.transcripts {
        let transcript = Transcript {
            id: t.id.clone(),
            scenario: String::new(),
            utterances: t.utterances.clone(),
        };
        let gold = GoldAnnotations {
            transcript_id: t.id.clone(),
            thread: t
                .thread
                .iter()
                .map(|(i, l)| (*i, ThreadLabel::parse(l).unwrap()))
                .collect(),
            ..Default::default()
        };
        out.insert(t.id.clone(), (transcript, gold));
    }
    (input, out)
}

pub fn render(case: &Case, data: &Data) -> RenderedPrompt {
    let ts = TemplateSet::builtin();
    let (t, g) = &data[&case.transcript];
    if let Some(target) = case.target {
        let labeled = matches!(
            case.template,
            TemplateId::ThreadWindow | TemplateId::AbcdeWindowThreaded
        );
        let feedback = if labeled { Feedback::Gold } else { Feedback::None };
        let cfg = WindowConfig::new(case.size.unwrap(), feedback).unwrap();
        let w = make_window(t, target, &cfg, &g.thread).unwrap();
        return match case.template {
            TemplateId::ThreadWindow => render_thread_window(&ts, &w),
            TemplateId::AbcdeWindowPlain | TemplateId::AbcdeWindowThreaded => render_abcde(
                &ts,
                case.template,
                AbcdePayload::Window {
                    window: &w,
                    target_label: g.thread.get(&target),
                },
            ),
            other => render_baseline(&ts, other, BaselinePayload::Window(&w)),
        }
        .unwrap();
    }
    match case.template {
        TemplateId::ThreadAllAtOnce => {
            let shots: Vec<_> = case.shots.iter().map(|s| (&data[s].0, &data[s].1)).collect();
            render_thread_all_at_once(&ts, t, &shots)
        }
        TemplateId::AbcdeFullPlain => render_abcde(
            &ts,
            case.template,
            AbcdePayload::Full {
                transcript: t,
                threads: None,
            },
        ),
        TemplateId::AbcdeFullThreaded => render_abcde(
            &ts,
            case.template,
            AbcdePayload::Full {
                transcript: t,
                threads: Some(&g.thread),
            },
        ),
        other => render_baseline(&ts, other, BaselinePayload::Full(t)),
    }
    .unwrap()
}

/// Frozen rendering for a case.
pub fn expected(case: &Case) -> String {
    std::fs::read_to_string(super::fixtures().join(format!("prompts/{}.txt", case.name))).unwrap()
}
