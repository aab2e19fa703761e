//! Sliding windows over a transcript, with optional label feedback for the
//! utterances preceding each target.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ThreadLabel, Transcript, Utterance};

/// Where context labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    /// The model's own earlier predictions.
    #[serde(rename = "self")]
    SelfFed,
    /// Reference labels (or any precomputed label map).
    Gold,
    None,
}

impl fmt::Display for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feedback::SelfFed => "self",
            Feedback::Gold => "gold",
            Feedback::None => "none",
        })
    }
}

impl FromStr for Feedback {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "self" => Ok(Feedback::SelfFed),
            "gold" => Ok(Feedback::Gold),
            "none" => Ok(Feedback::None),
            other => Err(format!("unknown feedback mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowConfig {
    /// Window size in utterances, target included.
    pub size: usize,
    pub feedback: Feedback,
}

impl WindowConfig {
    pub fn new(size: usize, feedback: Feedback) -> Result<Self, WindowError> {
        let cfg = Self { size, feedback };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), WindowError> {
        if self.size < 2 {
            return Err(WindowError::InvalidSize(self.size));
        }
        Ok(())
    }

    /// First 1-based index of the window ending at `target`.
    pub fn start(&self, target: u32) -> u32 {
        (target + 1).saturating_sub(self.size as u32).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WindowError {
    #[error("window size must be at least 2, got {0}")]
    InvalidSize(usize),
    #[error("target index {index} outside transcript of length {len}")]
    OutOfRange { index: u32, len: usize },
    #[error("no feedback label for utterance {0}")]
    MissingFeedbackLabel(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContextLine<'a> {
    pub utterance: &'a Utterance,
    pub label: Option<ThreadLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Window<'a> {
    pub transcript_id: &'a str,
    pub context: Vec<ContextLine<'a>>,
    pub target: &'a Utterance,
    pub target_index: u32,
}

impl Window<'_> {
    pub fn context_indices(&self) -> Vec<u32> {
        self.context.iter().map(|c| c.utterance.index).collect()
    }
}

pub fn make_window<'a>(
    t: &'a Transcript,
    index: u32,
    cfg: &WindowConfig,
    labels_so_far: &BTreeMap<u32, ThreadLabel>,
) -> Result<Window<'a>, WindowError> {
    cfg.check()?;
    let target = t
        .get(index)
        .ok_or(WindowError::OutOfRange { index, len: t.len() })?;
    let mut context = Vec::with_capacity(cfg.size - 1);
    for j in cfg.start(index)..index {
        let label = match cfg.feedback {
            Feedback::None => None,
            Feedback::SelfFed | Feedback::Gold => Some(
                labels_so_far
                    .get(&j)
                    .cloned()
                    .ok_or(WindowError::MissingFeedbackLabel(j))?,
            ),
        };
        context.push(ContextLine {
            utterance: &t.utterances[j as usize - 1],
            label,
        });
    }
    Ok(Window {
        transcript_id: &t.id,
        context,
        target,
        target_index: index,
    })
}

/// Windows for targets 1..=n in order.
///
/// Before building the window for target `i`, the label of `i - 1` is pulled
/// from the label source (unless feedback is `none`). With self feedback the
/// caller records its prediction for a target before asking for the next
/// window.
pub struct WindowSequence<'a, F> {
    transcript: &'a Transcript,
    cfg: WindowConfig,
    source: F,
    labels: BTreeMap<u32, ThreadLabel>,
    next: u32,
    failed: bool,
}

pub fn window_sequence<F>(t: &Transcript, cfg: WindowConfig, label_source: F) -> WindowSequence<'_, F>
where
    F: FnMut(u32) -> Option<ThreadLabel>,
{
    WindowSequence {
        transcript: t,
        cfg,
        source: label_source,
        labels: BTreeMap::new(),
        next: 1,
        failed: false,
    }
}

impl<'a, F> Iterator for WindowSequence<'a, F>
where
    F: FnMut(u32) -> Option<ThreadLabel>,
{
    type Item = Result<Window<'a>, WindowError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next as usize > self.transcript.len() {
            return None;
        }
        let i = self.next;
        if self.cfg.feedback != Feedback::None && i > 1 {
            match (self.source)(i - 1) {
                Some(label) => {
                    self.labels.insert(i - 1, label);
                }
                None => {
                    self.failed = true;
                    return Some(Err(WindowError::MissingFeedbackLabel(i - 1)));
                }
            }
            // labels that can no longer appear in a context are dropped
            let keep_from = self.cfg.start(i);
            self.labels = self.labels.split_off(&keep_from);
        }
        self.next += 1;
        let w = make_window(self.transcript, i, &self.cfg, &self.labels);
        if w.is_err() {
            self.failed = true;
        }
        Some(w)
    }
}
