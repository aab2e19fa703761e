//! Parsing of model answers into thread labels and code sets.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Code, CodeSet, ThreadLabel};
use crate::prompts::ExpectedLine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strictness {
    /// One exact line; index and speaker must match.
    Strict,
    /// Tolerates prose, spelling variants of the label key and a missing or
    /// differing speaker. An index, when present, must still match.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedThreadLine {
    pub index: u32,
    pub speaker: String,
    pub label: ThreadLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedCodeLine {
    pub index: u32,
    pub speaker: String,
    pub codes: CodeSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason")]
pub enum FailReason {
    NoMatch,
    IndexMismatch { expected: u32, got: u32 },
    SpeakerMismatch { expected: String, got: String },
    ForwardLink { target: u32 },
    UnknownCode { code: char },
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailReason::NoMatch => f.write_str("no line matches the answer format"),
            FailReason::IndexMismatch { expected, got } => {
                write!(f, "answer labels line {got}, expected {expected}")
            }
            FailReason::SpeakerMismatch { expected, got } => {
                write!(f, "answer names speaker {got:?}, expected {expected:?}")
            }
            FailReason::ForwardLink { target } => write!(f, "answer links forward to line {target}"),
            FailReason::UnknownCode { code } => write!(f, "unknown code {code:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ParseOutcome<T> {
    Ok(T),
    /// `raw` is the offending text, byte for byte.
    Failed {
        reason: FailReason,
        raw: String,
    },
}

impl<T> ParseOutcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            ParseOutcome::Ok(v) => Some(v),
            ParseOutcome::Failed { .. } => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, ParseOutcome::Ok(_))
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> ParseOutcome<U> {
        match self {
            ParseOutcome::Ok(v) => ParseOutcome::Ok(f(v)),
            ParseOutcome::Failed { reason, raw } => ParseOutcome::Failed { reason, raw },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Thread,
    Code,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Thread(ThreadLabel),
    Code(CodeSet),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedLine {
    pub index: u32,
    pub speaker: String,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockParse {
    /// One outcome per expected line, in expected order.
    pub outcomes: Vec<ParseOutcome<ParsedLine>>,
    /// Non-empty response lines that were not used for any expected line.
    pub surplus_lines: usize,
}

static STRICT_THREAD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^#?(\d+)\s+(.+?)\s*\[respond line\s*=\s*(\d+|-|\(\s*(?:\d+|-)\s*,\s*(?:\d+|-)\s*\))\s*\]$")
        .unwrap()
});
static STRICT_CODE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^#?(\d+)\s+(.+?)\s*\[([^\[\]]*)\]$").unwrap());
static STRICT_CODE_LIST: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:\S\s*(?:,\s*\S\s*)*)?$").unwrap());
static LENIENT_THREAD_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\[\s*respond(?:[ _]?line)?\s*[=:]?\s*([^\[\]]*?)\s*\]").unwrap());
static LENIENT_CODE_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]]*)\]").unwrap());
static LENIENT_PREFIX: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[\s*`>\-\u{2022}]*(?:(?i:output|answer|label|target(?: utterance)?)\s*:\s*)?#?(\d+)?[.:)]?\s*(.*?)[\s:*`]*$")
        .unwrap()
});

/// Lowercase with runs of whitespace collapsed.
fn normalize_speaker(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn normalize_dashes(s: &str) -> String {
    s.replace(['\u{2013}', '\u{2014}', '\u{2212}'], "-")
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '`' || c.is_whitespace())
        .to_string()
}

/// A line that has the answer shape, before comparing against expectations.
struct Candidate<'a> {
    index: Option<u32>,
    speaker: Option<String>,
    payload: Result<Payload, FailReason>,
    raw: &'a str,
}

fn parse_codes(inner: &str, strictness: Strictness) -> Result<CodeSet, FailReason> {
    let mut set = CodeSet::empty();
    match strictness {
        Strictness::Strict => {
            if !STRICT_CODE_LIST.is_match(inner) {
                return Err(FailReason::NoMatch);
            }
            for c in inner.chars().filter(|c| *c != ',' && !c.is_whitespace()) {
                set.insert(Code::from_letter(c).ok_or(FailReason::UnknownCode { code: c })?);
            }
        }
        Strictness::Lenient => {
            for token in inner
                .split(|c: char| !c.is_alphanumeric())
                .filter(|t| !t.is_empty())
            {
                let upper = token.to_uppercase();
                if upper == "AND" || upper == "NONE" {
                    continue;
                }
                let mut chars = upper.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => {
                        set.insert(Code::from_letter(c).ok_or(FailReason::UnknownCode { code: c })?)
                    }
                    _ => return Err(FailReason::NoMatch),
                }
            }
        }
    }
    Ok(set)
}

fn candidate<'a>(line: &'a str, kind: BlockKind, strictness: Strictness) -> Option<Candidate<'a>> {
    let trimmed = line.trim();
    match strictness {
        Strictness::Strict => {
            let (re, group) = match kind {
                BlockKind::Thread => (&*STRICT_THREAD, 3),
                BlockKind::Code => (&*STRICT_CODE, 3),
            };
            let caps = re.captures(trimmed)?;
            let index = caps[1].parse().ok();
            let speaker = Some(caps[2].to_string());
            let body = &caps[group];
            let payload = match kind {
                BlockKind::Thread => ThreadLabel::parse(body)
                    .map(Payload::Thread)
                    .map_err(|_| FailReason::NoMatch),
                BlockKind::Code => parse_codes(body, strictness).map(Payload::Code),
            };
            Some(Candidate {
                index,
                speaker,
                payload,
                raw: line,
            })
        }
        Strictness::Lenient => {
            let tag = match kind {
                BlockKind::Thread => LENIENT_THREAD_TAG.captures_iter(trimmed).last()?,
                BlockKind::Code => LENIENT_CODE_TAG.captures_iter(trimmed).last()?,
            };
            let whole = tag.get(0).unwrap();
            let body = tag.get(1).unwrap().as_str();
            let prefix = LENIENT_PREFIX.captures(&trimmed[..whole.start()])?;
            // anything other than punctuation after the tag means prose
            let after = &trimmed[whole.end()..];
            if after.chars().any(|c| c.is_alphanumeric()) {
                return None;
            }
            let index = prefix.get(1).and_then(|m| m.as_str().parse().ok());
            let speaker = prefix
                .get(2)
                .map(|m| m.as_str().trim().to_string())
                .filter(|s| !s.is_empty());
            let payload = match kind {
                BlockKind::Thread => ThreadLabel::parse(&normalize_dashes(body))
                    .map(Payload::Thread)
                    .map_err(|_| FailReason::NoMatch),
                BlockKind::Code => parse_codes(body, strictness).map(Payload::Code),
            };
            Some(Candidate {
                index,
                speaker,
                payload,
                raw: line,
            })
        }
    }
}

/// Checks a candidate against the line it is supposed to label.
fn settle(
    c: &Candidate<'_>,
    expected: &ExpectedLine,
    strictness: Strictness,
) -> Result<ParsedLine, FailReason> {
    if let Some(got) = c.index {
        if got != expected.index {
            return Err(FailReason::IndexMismatch {
                expected: expected.index,
                got,
            });
        }
    } else if strictness == Strictness::Strict {
        return Err(FailReason::NoMatch);
    }
    if strictness == Strictness::Strict {
        let got = c.speaker.clone().unwrap_or_default();
        if normalize_speaker(&got) != normalize_speaker(&expected.speaker) {
            return Err(FailReason::SpeakerMismatch {
                expected: expected.speaker.clone(),
                got,
            });
        }
    }
    let payload = c.payload.clone()?;
    if let Payload::Thread(label) = &payload {
        if let Err(crate::corpus::LabelError::ForwardLink { target, .. }) =
            label.check_backward(expected.index)
        {
            return Err(FailReason::ForwardLink { target });
        }
    }
    Ok(ParsedLine {
        index: expected.index,
        speaker: c.speaker.clone().unwrap_or_else(|| expected.speaker.clone()),
        payload,
    })
}

fn non_empty_lines(raw: &str) -> impl Iterator<Item = &str> {
    raw.split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.trim().is_empty())
}

fn parse_single(
    raw: &str,
    expected: &ExpectedLine,
    kind: BlockKind,
    strictness: Strictness,
) -> ParseOutcome<ParsedLine> {
    let fail = |reason| ParseOutcome::Failed {
        reason,
        raw: raw.to_string(),
    };
    let lines: Vec<&str> = non_empty_lines(raw).collect();
    let chosen = match strictness {
        Strictness::Strict => match lines.as_slice() {
            [one] => candidate(one, kind, strictness),
            _ => None,
        },
        Strictness::Lenient => lines.iter().rev().find_map(|l| candidate(l, kind, strictness)),
    };
    match chosen {
        None => fail(FailReason::NoMatch),
        Some(c) => match settle(&c, expected, strictness) {
            Ok(line) => ParseOutcome::Ok(line),
            Err(reason) => fail(reason),
        },
    }
}

pub fn parse_thread_response(
    raw: &str,
    expected_index: u32,
    expected_speaker: &str,
    strictness: Strictness,
) -> ParseOutcome<ParsedThreadLine> {
    let expected = ExpectedLine {
        index: expected_index,
        speaker: expected_speaker.to_string(),
    };
    parse_single(raw, &expected, BlockKind::Thread, strictness).map(|l| match l.payload {
        Payload::Thread(label) => ParsedThreadLine {
            index: l.index,
            speaker: l.speaker,
            label,
        },
        Payload::Code(_) => unreachable!("thread grammar yields thread payloads"),
    })
}

pub fn parse_code_response(
    raw: &str,
    expected_index: u32,
    expected_speaker: &str,
    strictness: Strictness,
) -> ParseOutcome<ParsedCodeLine> {
    let expected = ExpectedLine {
        index: expected_index,
        speaker: expected_speaker.to_string(),
    };
    parse_single(raw, &expected, BlockKind::Code, strictness).map(|l| match l.payload {
        Payload::Code(codes) => ParsedCodeLine {
            index: l.index,
            speaker: l.speaker,
            codes,
        },
        Payload::Thread(_) => unreachable!("code grammar yields code payloads"),
    })
}

/// Parses an n-line answer. Lines are matched to expected entries by index
/// when any line carries one, otherwise by position. Each expected entry gets
/// exactly one outcome; entries with no line fail with `NoMatch` and keep the
/// whole response as raw text.
pub fn parse_block_response(
    raw: &str,
    expected: &[ExpectedLine],
    kind: BlockKind,
    strictness: Strictness,
) -> BlockParse {
    let lines: Vec<&str> = non_empty_lines(raw).collect();
    let candidates: Vec<Candidate<'_>> = lines
        .iter()
        .filter_map(|l| candidate(l, kind, strictness))
        .collect();
    let mut used = vec![false; candidates.len()];
    let by_index = candidates.iter().any(|c| c.index.is_some());
    let missing = || ParseOutcome::Failed {
        reason: FailReason::NoMatch,
        raw: raw.to_string(),
    };
    let mut outcomes = Vec::with_capacity(expected.len());
    for (pos, e) in expected.iter().enumerate() {
        let slot = if by_index {
            candidates
                .iter()
                .enumerate()
                .position(|(k, c)| !used[k] && c.index == Some(e.index))
        } else {
            (pos < candidates.len()).then_some(pos)
        };
        let outcome = match slot {
            None => missing(),
            Some(k) => {
                used[k] = true;
                let c = &candidates[k];
                match settle(c, e, strictness) {
                    Ok(line) => ParseOutcome::Ok(line),
                    Err(reason) => ParseOutcome::Failed {
                        reason,
                        raw: c.raw.to_string(),
                    },
                }
            }
        };
        outcomes.push(outcome);
    }
    let used_count = used.iter().filter(|u| **u).count();
    let surplus_lines = lines.len() - used_count;
    if surplus_lines > 0 {
        log::warn!("{surplus_lines} response line(s) not aligned to any expected line");
    }
    BlockParse {
        outcomes,
        surplus_lines,
    }
}
