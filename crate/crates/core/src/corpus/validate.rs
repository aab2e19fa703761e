use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use super::{GoldAnnotations, Transcript};

const DEFAULT_BACKCHANNELS: [&str; 13] = [
    "yeah", "yes", "ok", "okay", "hmm", "hmmm", "mhm", "mhmm", "uh-huh", "right", "sure", "no", "yep",
];

/// Words that make up a backchannel acknowledgement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    words: BTreeSet<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::new(DEFAULT_BACKCHANNELS)
    }
}

impl Lexicon {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        Ok(Self::new(
            raw.lines().filter(|l| !l.trim_start().starts_with('#')),
        ))
    }

    /// True for texts of one or two tokens, all in the lexicon, after
    /// lower-casing and dropping punctuation. Hyphens and apostrophes inside a
    /// word are kept so that `uh-huh` survives.
    pub fn is_backchannel(&self, text: &str) -> bool {
        let tokens = tokenize(text);
        (1..=2).contains(&tokens.len()) && tokens.iter().all(|t| self.words.contains(t))
    }
}

fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .filter_map(|raw| {
            let chars: Vec<char> = raw.chars().collect();
            let kept: String = chars
                .iter()
                .enumerate()
                .filter(|(i, c)| {
                    c.is_alphanumeric()
                        || ((**c == '-' || **c == '\'')
                            && *i > 0
                            && *i + 1 < chars.len()
                            && chars[i - 1].is_alphanumeric()
                            && chars[i + 1].is_alphanumeric())
                })
                .map(|(_, c)| *c)
                .collect();
            (!kept.is_empty()).then_some(kept)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub lexicon: Lexicon,
    /// Links longer than this many turns are flagged.
    pub long_gap: u32,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            lexicon: Lexicon::default(),
            long_gap: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum HardError {
    MissingLabel { index: u32 },
    ForwardLink { index: u32, target: u32 },
    DanglingIndex { index: u32, target: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum Lint {
    BackchannelLinked { index: u32, target: u32 },
    LongGap { index: u32, target: u32, gap: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub transcript_id: String,
    pub errors: Vec<HardError>,
    pub lints: Vec<Lint>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.lints.is_empty()
    }
}

pub fn validate_thread_graph(
    t: &Transcript,
    g: &GoldAnnotations,
    cfg: &ValidationConfig,
) -> ValidationReport {
    let n = t.len() as u32;
    let mut errors = Vec::new();
    let mut lints = Vec::new();
    for i in 1..=n {
        if !g.thread.contains_key(&i) {
            errors.push(HardError::MissingLabel { index: i });
        }
    }
    for (&index, label) in &g.thread {
        for target in label.lines() {
            if target >= index {
                errors.push(HardError::ForwardLink { index, target });
                continue;
            }
            if index > n || target > n {
                errors.push(HardError::DanglingIndex { index, target });
                continue;
            }
            if let Some(u) = t.get(target) {
                if cfg.lexicon.is_backchannel(&u.text) {
                    lints.push(Lint::BackchannelLinked { index, target });
                }
            }
            let gap = index - target;
            if gap > cfg.long_gap {
                lints.push(Lint::LongGap { index, target, gap });
            }
        }
    }
    ValidationReport {
        transcript_id: t.id.clone(),
        errors,
        lints,
    }
}
