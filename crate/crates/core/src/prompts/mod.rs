//! Rendering of threading, ABCDE and baseline prompts from template assets.

mod format;
mod template;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{format_timestamp, GoldAnnotations, ThreadLabel, Transcript, Utterance};
use crate::windowing::Window;

pub use format::{
    extract_block, parse_utterance_line, single_line, transcript_lines, utterance_line, PromptLine,
    EXAMPLE_END, EXAMPLE_START, TARGET_END, TARGET_START, TRANSCRIPT_END, TRANSCRIPT_START,
};
pub use template::{Template, TemplateError, TemplateId, TemplateSet};

pub const MAX_SHOTS: usize = 3;

/// What shape of answer a prompt asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpectedOutput {
    ThreadLine,
    CodeLine,
    ThreadBlock { n: usize },
    CodeBlock { n: usize },
}

impl ExpectedOutput {
    pub fn is_block(self) -> bool {
        matches!(
            self,
            ExpectedOutput::ThreadBlock { .. } | ExpectedOutput::CodeBlock { .. }
        )
    }

    pub fn is_thread(self) -> bool {
        matches!(
            self,
            ExpectedOutput::ThreadLine | ExpectedOutput::ThreadBlock { .. }
        )
    }
}

/// Index and speaker of one line the answer must label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedLine {
    pub index: u32,
    pub speaker: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub template_id: TemplateId,
    pub text: String,
    pub expected_output: ExpectedOutput,
    pub transcript_id: String,
    /// Lines to be labeled, in order: one for single-line prompts, n for blocks.
    pub lines: Vec<ExpectedLine>,
}

impl RenderedPrompt {
    pub fn target_index(&self) -> Option<u32> {
        match self.expected_output {
            ExpectedOutput::ThreadLine | ExpectedOutput::CodeLine => self.lines.first().map(|l| l.index),
            _ => None,
        }
    }

    pub fn target_speaker(&self) -> Option<&str> {
        match self.expected_output {
            ExpectedOutput::ThreadLine | ExpectedOutput::CodeLine => {
                self.lines.first().map(|l| l.speaker.as_str())
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("no thread label for utterance {0}")]
    MissingThreadLabel(u32),
    #[error("at most {MAX_SHOTS} example transcripts, got {0}")]
    TooManyShots(usize),
    #[error("template {id} cannot render a {payload} payload")]
    WrongTemplate { id: TemplateId, payload: &'static str },
}

fn expected(u: &Utterance) -> ExpectedLine {
    ExpectedLine {
        index: u.index,
        speaker: single_line(&u.speaker),
    }
}

fn join(lines: impl IntoIterator<Item = String>) -> String {
    lines.into_iter().collect::<Vec<_>>().join("\n")
}

fn plain_block(utterances: &[Utterance]) -> String {
    join(utterances.iter().map(|u| utterance_line(u, None)))
}

fn labeled_block(
    utterances: &[Utterance],
    labels: &BTreeMap<u32, ThreadLabel>,
) -> Result<String, PromptError> {
    let lines = utterances
        .iter()
        .map(|u| {
            labels
                .get(&u.index)
                .map(|l| utterance_line(u, Some(l)))
                .ok_or(PromptError::MissingThreadLabel(u.index))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(lines.join("\n"))
}

/// Window lines; context labels are shown when `with_labels` is set and
/// present, and the target carries `target_label` if given.
fn window_block(w: &Window<'_>, with_labels: bool, target_label: Option<&ThreadLabel>) -> String {
    let mut lines: Vec<String> = w
        .context
        .iter()
        .map(|c| {
            let label = if with_labels { c.label.as_ref() } else { None };
            utterance_line(c.utterance, label)
        })
        .collect();
    lines.push(utterance_line(w.target, target_label));
    lines.join("\n")
}

fn single(id: TemplateId, text: String, expected_output: ExpectedOutput, w: &Window<'_>) -> RenderedPrompt {
    RenderedPrompt {
        template_id: id,
        text,
        expected_output,
        transcript_id: w.transcript_id.to_string(),
        lines: vec![expected(w.target)],
    }
}

fn block(id: TemplateId, text: String, expected_output: ExpectedOutput, t: &Transcript) -> RenderedPrompt {
    RenderedPrompt {
        template_id: id,
        text,
        expected_output,
        transcript_id: t.id.clone(),
        lines: t.utterances.iter().map(expected).collect(),
    }
}

const REVIEW_NOTE_SHOTS: &str =
    "Then I will provide the example transcript with labels and new transcript without labels for threading.";
const REVIEW_NOTE_ZERO_SHOT: &str = "Then I will provide the new transcript without labels for threading.";

/// Whole-transcript threading prompt with up to three fully labeled example
/// transcripts, in the order given.
pub fn render_thread_all_at_once(
    templates: &TemplateSet,
    t: &Transcript,
    shots: &[(&Transcript, &GoldAnnotations)],
) -> Result<RenderedPrompt, PromptError> {
    if shots.len() > MAX_SHOTS {
        return Err(PromptError::TooManyShots(shots.len()));
    }
    let mut examples = String::new();
    for (k, (shot, gold)) in shots.iter().enumerate() {
        let body = labeled_block(&shot.utterances, &gold.thread)?;
        examples.push_str(&format!(
            "\nExample transcript {} (with labels):\n{EXAMPLE_START}\n{body}\n{EXAMPLE_END}\n",
            k + 1
        ));
    }
    let review_note = if shots.is_empty() {
        REVIEW_NOTE_ZERO_SHOT
    } else {
        REVIEW_NOTE_SHOTS
    };
    let id = TemplateId::ThreadAllAtOnce;
    let n = t.len().to_string();
    let transcript = plain_block(&t.utterances);
    let text = templates.get(id).render(&[
        ("review_note", review_note),
        ("examples", &examples),
        ("transcript", &transcript),
        ("num_utterances", &n),
    ])?;
    Ok(block(id, text, ExpectedOutput::ThreadBlock { n: t.len() }, t))
}

/// Sliding-window threading prompt: context lines carry their labels, the
/// target line does not.
pub fn render_thread_window(templates: &TemplateSet, w: &Window<'_>) -> Result<RenderedPrompt, PromptError> {
    let id = TemplateId::ThreadWindow;
    let transcript = window_block(w, true, None);
    let text = templates.get(id).render(&[("transcript", &transcript)])?;
    Ok(single(id, text, ExpectedOutput::ThreadLine, w))
}

#[derive(Debug, Clone, Copy)]
pub enum AbcdePayload<'a> {
    Window {
        window: &'a Window<'a>,
        /// Thread label of the target, shown by the threaded variant.
        target_label: Option<&'a ThreadLabel>,
    },
    Full {
        transcript: &'a Transcript,
        threads: Option<&'a BTreeMap<u32, ThreadLabel>>,
    },
}

pub fn render_abcde(
    templates: &TemplateSet,
    variant: TemplateId,
    payload: AbcdePayload<'_>,
) -> Result<RenderedPrompt, PromptError> {
    let template = templates.get(variant);
    match (variant, payload) {
        (
            TemplateId::AbcdeWindowPlain | TemplateId::AbcdeWindowThreaded,
            AbcdePayload::Window { window, target_label },
        ) => {
            let transcript = if variant == TemplateId::AbcdeWindowThreaded {
                if let Some(missing) = window.context.iter().find(|c| c.label.is_none()) {
                    return Err(PromptError::MissingThreadLabel(missing.utterance.index));
                }
                let label = target_label.ok_or(PromptError::MissingThreadLabel(window.target_index))?;
                window_block(window, true, Some(label))
            } else {
                window_block(window, false, None)
            };
            let target = window.target;
            let text = template.render(&[
                ("transcript", &transcript),
                ("target_timestamp", &format_timestamp(target.timestamp_ms)),
                ("target_speaker", &single_line(&target.speaker)),
                ("target_text", &single_line(&target.text)),
            ])?;
            Ok(single(variant, text, ExpectedOutput::CodeLine, window))
        }
        (
            TemplateId::AbcdeFullPlain | TemplateId::AbcdeFullThreaded,
            AbcdePayload::Full {
                transcript: t,
                threads,
            },
        ) => {
            let transcript = if variant == TemplateId::AbcdeFullThreaded {
                match threads {
                    Some(labels) => labeled_block(&t.utterances, labels)?,
                    None if t.is_empty() => String::new(),
                    None => return Err(PromptError::MissingThreadLabel(1)),
                }
            } else {
                plain_block(&t.utterances)
            };
            let n = t.len().to_string();
            let text = template.render(&[("transcript", &transcript), ("num_utterances", &n)])?;
            Ok(block(variant, text, ExpectedOutput::CodeBlock { n: t.len() }, t))
        }
        (_, AbcdePayload::Window { .. }) => Err(PromptError::WrongTemplate {
            id: variant,
            payload: "ABCDE window",
        }),
        (_, AbcdePayload::Full { .. }) => Err(PromptError::WrongTemplate {
            id: variant,
            payload: "ABCDE full-transcript",
        }),
    }
}

#[derive(Debug, Clone, Copy)]
pub enum BaselinePayload<'a> {
    Window(&'a Window<'a>),
    Full(&'a Transcript),
}

/// Baseline coding prompts. Lee and Qamar take a window whose last line is
/// the target; Martinenghi takes a whole transcript.
pub fn render_baseline(
    templates: &TemplateSet,
    variant: TemplateId,
    payload: BaselinePayload<'_>,
) -> Result<RenderedPrompt, PromptError> {
    let template = templates.get(variant);
    match (variant, payload) {
        (TemplateId::BaselineLee, BaselinePayload::Window(w)) => {
            let transcript = window_block(w, false, None);
            let text = template.render(&[
                ("transcript", &transcript),
                ("target_speaker", &single_line(&w.target.speaker)),
                ("target_text", &single_line(&w.target.text)),
            ])?;
            Ok(single(variant, text, ExpectedOutput::CodeLine, w))
        }
        (TemplateId::BaselineQamar, BaselinePayload::Window(w)) => {
            let transcript = window_block(w, false, None);
            let text = template.render(&[("transcript", &transcript)])?;
            Ok(single(variant, text, ExpectedOutput::CodeLine, w))
        }
        (TemplateId::BaselineMartinenghi, BaselinePayload::Full(t)) => {
            let n = t.len().to_string();
            let text = template.render(&[
                ("transcript", &plain_block(&t.utterances)),
                ("num_utterances", &n),
            ])?;
            Ok(block(variant, text, ExpectedOutput::CodeBlock { n: t.len() }, t))
        }
        (_, BaselinePayload::Window(_)) => Err(PromptError::WrongTemplate {
            id: variant,
            payload: "baseline window",
        }),
        (_, BaselinePayload::Full(_)) => Err(PromptError::WrongTemplate {
            id: variant,
            payload: "baseline full-transcript",
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::windowing::{make_window, Feedback, WindowConfig};
    use proptest::prelude::*;
    use regex::Regex;

    fn transcript(n: u32) -> Transcript {
        let speakers = ["Serena", "Ivy", "Maya Chen", "Oscar"];
        Transcript {
            id: "demo".into(),
            scenario: String::new(),
            utterances: (1..=n)
                .map(|i| Utterance {
                    index: i,
                    timestamp_ms: u64::from(i) * 3000,
                    speaker: speakers[i as usize % 4].into(),
                    text: format!("point number {i}"),
                })
                .collect(),
        }
    }

    fn gold(t: &Transcript) -> GoldAnnotations {
        GoldAnnotations {
            transcript_id: t.id.clone(),
            thread: t
                .utterances
                .iter()
                .map(|u| {
                    let l = if u.index == 1 {
                        ThreadLabel::new_thread()
                    } else {
                        ThreadLabel::line(u.index - 1)
                    };
                    (u.index, l)
                })
                .collect(),
            ..Default::default()
        }
    }

    fn no_slots_left(text: &str) -> bool {
        let slot = Regex::new(r"\{(review_note|examples|transcript|num_utterances|target_timestamp|target_speaker|target_text)\}").unwrap();
        !slot.is_match(text)
    }

    #[test]
    fn window_prompt_shows_context_labels() {
        let ts = TemplateSet::builtin();
        let t = transcript(3);
        let g = gold(&t);
        let cfg = WindowConfig::new(10, Feedback::Gold).unwrap();
        let w = make_window(&t, 3, &cfg, &g.thread).unwrap();
        let p = render_thread_window(&ts, &w).unwrap();
        assert!(p.text.contains("#1 Ivy: point number 1 [respond_line= -]\n#2 Maya Chen: point number 2 [respond_line= 1]\n#3 Oscar: point number 3\n<<<TRANSCRIPT_END>>>"));
        assert_eq!(p.expected_output, ExpectedOutput::ThreadLine);
        assert_eq!(p.target_index(), Some(3));
        assert_eq!(p.target_speaker(), Some("Oscar"));
        assert!(no_slots_left(&p.text));
    }

    #[test]
    fn first_window_holds_only_target() {
        let ts = TemplateSet::builtin();
        let t = transcript(3);
        let cfg = WindowConfig::new(10, Feedback::SelfFed).unwrap();
        let w = make_window(&t, 1, &cfg, &BTreeMap::new()).unwrap();
        let p = render_thread_window(&ts, &w).unwrap();
        let lines = transcript_lines(&p.text).unwrap();
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].index, 1);
        assert!(lines[0].label.is_none());
    }

    #[test]
    fn zero_and_three_shots() {
        let ts = TemplateSet::builtin();
        let t = transcript(4);
        let zero = render_thread_all_at_once(&ts, &t, &[]).unwrap();
        assert!(!zero.text.contains(EXAMPLE_START));
        assert!(!zero.text.contains("example transcript"));
        assert!(zero.text.contains("EXACTLY 4 label lines"));

        let shots: Vec<Transcript> = (2..5).map(transcript).collect();
        let golds: Vec<GoldAnnotations> = shots.iter().map(gold).collect();
        let pairs: Vec<_> = shots.iter().zip(golds.iter()).collect();
        let three = render_thread_all_at_once(&ts, &t, &pairs).unwrap();
        assert_eq!(three.text.matches(EXAMPLE_START).count(), 3);
        assert!(three.text.contains("Example transcript 3 (with labels):"));
        let last_example = three.text.rfind(EXAMPLE_END).unwrap();
        assert!(last_example < three.text.find(TRANSCRIPT_START).unwrap());
        assert_eq!(three.expected_output, ExpectedOutput::ThreadBlock { n: 4 });
        assert_eq!(render_thread_all_at_once(&ts, &t, &pairs).unwrap(), three);

        let four: Vec<_> = pairs.iter().cycle().take(4).copied().collect();
        assert_eq!(
            render_thread_all_at_once(&ts, &t, &four),
            Err(PromptError::TooManyShots(4))
        );
    }

    #[test]
    fn abcde_variants() {
        let ts = TemplateSet::builtin();
        let t = transcript(42);
        let g = gold(&t);
        let full = render_abcde(
            &ts,
            TemplateId::AbcdeFullPlain,
            AbcdePayload::Full {
                transcript: &t,
                threads: None,
            },
        )
        .unwrap();
        assert!(full.text.contains("EXACTLY 42 label lines"));
        assert!(!full.text.contains("respond_line="));

        let threaded = render_abcde(
            &ts,
            TemplateId::AbcdeFullThreaded,
            AbcdePayload::Full {
                transcript: &t,
                threads: Some(&g.thread),
            },
        )
        .unwrap();
        assert!(threaded
            .text
            .contains("#42 Maya Chen: point number 42 [respond_line= 41]"));

        let cfg = WindowConfig::new(10, Feedback::Gold).unwrap();
        let w = make_window(&t, 20, &cfg, &g.thread).unwrap();
        let win = render_abcde(
            &ts,
            TemplateId::AbcdeWindowThreaded,
            AbcdePayload::Window {
                window: &w,
                target_label: g.thread.get(&20),
            },
        )
        .unwrap();
        assert!(win.text.contains("thread of conversation"));
        assert!(win.text.contains(" \"00:01:00 Serena point number 20\""));
        assert_eq!(win.expected_output, ExpectedOutput::CodeLine);
        assert_eq!(
            render_abcde(
                &ts,
                TemplateId::AbcdeWindowThreaded,
                AbcdePayload::Window {
                    window: &w,
                    target_label: None
                }
            ),
            Err(PromptError::MissingThreadLabel(20))
        );

        let plain_cfg = WindowConfig::new(10, Feedback::None).unwrap();
        let pw = make_window(&t, 20, &plain_cfg, &BTreeMap::new()).unwrap();
        let plain = render_abcde(
            &ts,
            TemplateId::AbcdeWindowPlain,
            AbcdePayload::Window {
                window: &pw,
                target_label: None,
            },
        )
        .unwrap();
        let target = extract_block(&plain.text, TARGET_START, TARGET_END).unwrap();
        assert_eq!(target, " \"00:01:00 Serena point number 20\"");
        assert!(!plain.text.contains("respond_line="));
        assert!(matches!(
            render_abcde(
                &ts,
                TemplateId::AbcdeFullPlain,
                AbcdePayload::Window {
                    window: &pw,
                    target_label: None
                }
            ),
            Err(PromptError::WrongTemplate { .. })
        ));
    }

    #[test]
    fn baselines() {
        let ts = TemplateSet::builtin();
        let t = transcript(12);
        let cfg = WindowConfig::new(10, Feedback::None).unwrap();
        let w = make_window(&t, 12, &cfg, &BTreeMap::new()).unwrap();
        let lee = render_baseline(&ts, TemplateId::BaselineLee, BaselinePayload::Window(&w)).unwrap();
        assert!(lee.text.contains("[Categories]") && lee.text.contains("[Output Format]"));
        assert!(lee
            .text
            .contains("<<<TARGET_START>>>\nSerena point number 12\n<<<TARGET_END>>>"));
        let qamar = render_baseline(&ts, TemplateId::BaselineQamar, BaselinePayload::Window(&w)).unwrap();
        assert!(qamar.text.contains("Output: 10 Serena [E]"));
        assert_eq!(qamar.expected_output, ExpectedOutput::CodeLine);
        let mart = render_baseline(&ts, TemplateId::BaselineMartinenghi, BaselinePayload::Full(&t)).unwrap();
        assert!(mart.text.contains("exactly 12 label lines"));
        assert_eq!(mart.lines.len(), 12);
        for p in [&lee, &qamar, &mart] {
            assert!(no_slots_left(&p.text));
            assert!(p.text.contains(TRANSCRIPT_START) && p.text.contains(TRANSCRIPT_END));
        }
    }

    fn arb_transcript() -> impl Strategy<Value = Transcript> {
        let word = "[a-zA-Z0-9,.?!'\\-]{1,8}";
        let speaker = prop::sample::select(vec!["Serena", "Maya Chen", "Red Morgan", "Oscar", "Jalen"]);
        prop::collection::vec((speaker, prop::collection::vec(word, 1..8)), 1..40).prop_map(|rows| {
            Transcript {
                id: "p".into(),
                scenario: String::new(),
                utterances: rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, (s, words))| Utterance {
                        index: i as u32 + 1,
                        timestamp_ms: i as u64 * 1000,
                        speaker: s.to_string(),
                        text: words.join(" "),
                    })
                    .collect(),
            }
        })
    }

    proptest! {
        #[test]
        fn transcript_block_round_trips(t in arb_transcript(), size in 2usize..15) {
            let ts = TemplateSet::builtin();
            let g = gold(&t);
            let all = render_thread_all_at_once(&ts, &t, &[]).unwrap();
            let lines = transcript_lines(&all.text).unwrap();
            prop_assert_eq!(lines.len(), t.len());
            for (line, u) in lines.iter().zip(&t.utterances) {
                prop_assert_eq!(line.index, u.index);
                prop_assert_eq!(&line.speaker, &u.speaker);
                prop_assert_eq!(&line.text, &u.text);
                prop_assert!(line.label.is_none());
            }
            let cfg = WindowConfig::new(size, Feedback::Gold).unwrap();
            let target = t.len() as u32;
            let w = make_window(&t, target, &cfg, &g.thread).unwrap();
            let p = render_thread_window(&ts, &w).unwrap();
            let lines = transcript_lines(&p.text).unwrap();
            prop_assert_eq!(lines.len(), w.context.len() + 1);
            for (line, c) in lines.iter().zip(&w.context) {
                prop_assert_eq!(line.index, c.utterance.index);
                prop_assert_eq!(&line.text, &c.utterance.text);
                prop_assert_eq!(line.label.as_ref(), c.label.as_ref());
            }
            prop_assert!(no_slots_left(&p.text));
        }
    }
}
