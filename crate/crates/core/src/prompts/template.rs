use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    ThreadAllAtOnce,
    ThreadWindow,
    AbcdeWindowPlain,
    AbcdeWindowThreaded,
    AbcdeFullPlain,
    AbcdeFullThreaded,
    BaselineLee,
    BaselineQamar,
    BaselineMartinenghi,
}

impl TemplateId {
    pub const ALL: [TemplateId; 9] = [
        TemplateId::ThreadAllAtOnce,
        TemplateId::ThreadWindow,
        TemplateId::AbcdeWindowPlain,
        TemplateId::AbcdeWindowThreaded,
        TemplateId::AbcdeFullPlain,
        TemplateId::AbcdeFullThreaded,
        TemplateId::BaselineLee,
        TemplateId::BaselineQamar,
        TemplateId::BaselineMartinenghi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateId::ThreadAllAtOnce => "thread_all_at_once",
            TemplateId::ThreadWindow => "thread_window",
            TemplateId::AbcdeWindowPlain => "abcde_window_plain",
            TemplateId::AbcdeWindowThreaded => "abcde_window_threaded",
            TemplateId::AbcdeFullPlain => "abcde_full_plain",
            TemplateId::AbcdeFullThreaded => "abcde_full_threaded",
            TemplateId::BaselineLee => "baseline_lee",
            TemplateId::BaselineQamar => "baseline_qamar",
            TemplateId::BaselineMartinenghi => "baseline_martinenghi",
        }
    }

    fn builtin_source(self) -> &'static str {
        match self {
            TemplateId::ThreadAllAtOnce => include_str!("../../templates/thread_all_at_once.txt"),
            TemplateId::ThreadWindow => include_str!("../../templates/thread_window.txt"),
            TemplateId::AbcdeWindowPlain => include_str!("../../templates/abcde_window_plain.txt"),
            TemplateId::AbcdeWindowThreaded => {
                include_str!("../../templates/abcde_window_threaded.txt")
            }
            TemplateId::AbcdeFullPlain => include_str!("../../templates/abcde_full_plain.txt"),
            TemplateId::AbcdeFullThreaded => include_str!("../../templates/abcde_full_threaded.txt"),
            TemplateId::BaselineLee => include_str!("../../templates/baseline_lee.txt"),
            TemplateId::BaselineQamar => include_str!("../../templates/baseline_qamar.txt"),
            TemplateId::BaselineMartinenghi => {
                include_str!("../../templates/baseline_martinenghi.txt")
            }
        }
    }

    /// Slots a template for this id may use.
    pub fn slots(self) -> &'static [&'static str] {
        match self {
            TemplateId::ThreadAllAtOnce => &["review_note", "examples", "transcript", "num_utterances"],
            TemplateId::ThreadWindow | TemplateId::BaselineQamar => &["transcript"],
            TemplateId::AbcdeWindowPlain | TemplateId::AbcdeWindowThreaded => {
                &["transcript", "target_timestamp", "target_speaker", "target_text"]
            }
            TemplateId::AbcdeFullPlain | TemplateId::AbcdeFullThreaded | TemplateId::BaselineMartinenghi => {
                &["transcript", "num_utterances"]
            }
            TemplateId::BaselineLee => &["transcript", "target_speaker", "target_text"],
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| format!("unknown template id {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("{id}: unbalanced brace at byte {offset}")]
    Syntax { id: TemplateId, offset: usize },
    #[error("{id}: unknown slot {{{name}}}")]
    UnknownSlot { id: TemplateId, name: String },
    #[error("{id}: no value bound for slot {{{name}}}")]
    Unbound { id: TemplateId, name: String },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

/// A parsed template. `{name}` is a slot, `{{` and `}}` are literal braces,
/// and leading lines starting with `%%` are comments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    id: TemplateId,
    segments: Vec<Segment>,
}

fn is_slot_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

impl Template {
    pub fn parse(id: TemplateId, source: &str) -> Result<Self, TemplateError> {
        let normalized = source.replace("\r\n", "\n");
        let mut body = normalized.as_str();
        while body.starts_with("%%") {
            body = body.split_once('\n').map_or("", |(_, rest)| rest);
        }
        let mut segments = Vec::new();
        let mut text = String::new();
        let bytes = body.as_bytes();
        let mut i = 0;
        while i < body.len() {
            let rest = &body[i..];
            if rest.starts_with("{{") {
                text.push('{');
                i += 2;
            } else if rest.starts_with("}}") {
                text.push('}');
                i += 2;
            } else if bytes[i] == b'{' {
                let close = rest.find('}').ok_or(TemplateError::Syntax { id, offset: i })?;
                let name = &rest[1..close];
                if !is_slot_name(name) {
                    return Err(TemplateError::Syntax { id, offset: i });
                }
                if !id.slots().contains(&name) {
                    return Err(TemplateError::UnknownSlot {
                        id,
                        name: name.to_string(),
                    });
                }
                if !text.is_empty() {
                    segments.push(Segment::Text(std::mem::take(&mut text)));
                }
                segments.push(Segment::Slot(name.to_string()));
                i += close + 1;
            } else if bytes[i] == b'}' {
                return Err(TemplateError::Syntax { id, offset: i });
            } else {
                let ch = rest.chars().next().unwrap();
                text.push(ch);
                i += ch.len_utf8();
            }
        }
        if !text.is_empty() {
            segments.push(Segment::Text(text));
        }
        Ok(Self { id, segments })
    }

    pub fn id(&self) -> TemplateId {
        self.id
    }

    pub fn slots_used(&self) -> BTreeSet<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(name) => Some(name.as_str()),
                Segment::Text(_) => None,
            })
            .collect()
    }

    /// Substitutes every slot. Values are inserted verbatim, never re-parsed.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(name) => {
                    let value = values
                        .iter()
                        .find(|(k, _)| k == name)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| TemplateError::Unbound {
                            id: self.id,
                            name: name.clone(),
                        })?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }
}

/// One template per id.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, Template>,
}

impl TemplateSet {
    /// The templates compiled into the crate.
    pub fn builtin() -> Self {
        let templates = TemplateId::ALL
            .into_iter()
            .map(|id| {
                let t = Template::parse(id, id.builtin_source())
                    .unwrap_or_else(|e| panic!("bundled template is invalid: {e}"));
                (id, t)
            })
            .collect();
        Self { templates }
    }

    /// Builtins overridden by any `<id>.txt` found in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::builtin();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{}.txt", id.name()));
            if !path.exists() {
                continue;
            }
            let source = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            set.templates.insert(id, Template::parse(id, &source)?);
        }
        Ok(set)
    }

    pub fn get(&self, id: TemplateId) -> &Template {
        &self.templates[&id]
    }

    pub fn builtin_source(id: TemplateId) -> &'static str {
        id.builtin_source()
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}
