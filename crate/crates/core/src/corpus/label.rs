use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// One target of a respond-line label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkTarget {
    /// Link back to an earlier 1-based line.
    Line(u32),
    /// The `-` marker: the contribution opens a new thread.
    NewThread,
}

impl fmt::Display for LinkTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkTarget::Line(n) => write!(f, "{n}"),
            LinkTarget::NewThread => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("unrecognised respond-line syntax {0:?}")]
    Syntax(String),
    #[error("a label carries one or two targets, got {0}")]
    Arity(usize),
    #[error("at most one new-thread marker per label")]
    DuplicateNewThread,
    #[error("split label repeats line {0}")]
    DuplicateLine(u32),
    #[error("line numbers start at 1")]
    ZeroLine,
    #[error("line {carrier} links forward to line {target}")]
    ForwardLink { carrier: u32, target: u32 },
}

/// The respond-line value of one utterance.
///
/// Holds one target, or two for a split contribution (one utterance serving
/// two threads). Targets keep the order they were written in; use
/// [`ThreadLabel::canonical`] for comparisons.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ThreadLabel {
    targets: Vec<LinkTarget>,
}

impl ThreadLabel {
    pub fn new_thread() -> Self {
        Self {
            targets: vec![LinkTarget::NewThread],
        }
    }

    /// Single backward link. Panics on line 0.
    pub fn line(line: u32) -> Self {
        assert!(line >= 1, "line numbers start at 1");
        Self {
            targets: vec![LinkTarget::Line(line)],
        }
    }

    pub fn from_targets(targets: Vec<LinkTarget>) -> Result<Self, LabelError> {
        if targets.is_empty() || targets.len() > 2 {
            return Err(LabelError::Arity(targets.len()));
        }
        for t in &targets {
            if *t == LinkTarget::Line(0) {
                return Err(LabelError::ZeroLine);
            }
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(match targets[0] {
                LinkTarget::NewThread => LabelError::DuplicateNewThread,
                LinkTarget::Line(n) => LabelError::DuplicateLine(n),
            });
        }
        Ok(Self { targets })
    }

    /// Parses the surface forms `24`, `-`, `(24, -)`, `(3, 9)` and their
    /// whitespace variants. Does not check link direction.
    pub fn parse(raw: &str) -> Result<Self, LabelError> {
        let trimmed = raw.trim();
        let inner = match (trimmed.strip_prefix('('), trimmed.strip_suffix(')')) {
            (Some(_), Some(_)) if trimmed.len() >= 2 => &trimmed[1..trimmed.len() - 1],
            (None, None) => trimmed,
            _ => return Err(LabelError::Syntax(raw.to_string())),
        };
        let mut targets = Vec::with_capacity(2);
        for part in inner.split(',') {
            let part = part.trim();
            let target = if part == "-" {
                LinkTarget::NewThread
            } else if !part.is_empty() && part.bytes().all(|b| b.is_ascii_digit()) {
                let n: u32 = part.parse().map_err(|_| LabelError::Syntax(raw.to_string()))?;
                LinkTarget::Line(n)
            } else {
                return Err(LabelError::Syntax(raw.to_string()));
            };
            targets.push(target);
        }
        if targets.len() > 2 {
            return Err(LabelError::Syntax(raw.to_string()));
        }
        Self::from_targets(targets)
    }

    /// Parses and checks that every line target precedes `carrier`.
    pub fn parse_for(raw: &str, carrier: u32) -> Result<Self, LabelError> {
        let label = Self::parse(raw)?;
        label.check_backward(carrier)?;
        Ok(label)
    }

    pub fn check_backward(&self, carrier: u32) -> Result<(), LabelError> {
        for line in self.lines() {
            if line >= carrier {
                return Err(LabelError::ForwardLink {
                    carrier,
                    target: line,
                });
            }
        }
        Ok(())
    }

    pub fn targets(&self) -> &[LinkTarget] {
        &self.targets
    }

    pub fn lines(&self) -> impl Iterator<Item = u32> + '_ {
        self.targets.iter().filter_map(|t| match t {
            LinkTarget::Line(n) => Some(*n),
            LinkTarget::NewThread => None,
        })
    }

    pub fn is_split(&self) -> bool {
        self.targets.len() == 2
    }

    /// True when the label is exactly `-` (no backward link at all).
    pub fn is_new_thread_only(&self) -> bool {
        self.targets == [LinkTarget::NewThread]
    }

    /// Comparison form: numeric parts first and ascending, `-` last.
    pub fn canonical(&self) -> String {
        let mut sorted = self.targets.clone();
        sorted.sort();
        render(&sorted)
    }
}

fn render(targets: &[LinkTarget]) -> String {
    match targets {
        [one] => one.to_string(),
        [a, b] => format!("({a}, {b})"),
        _ => unreachable!("arity checked at construction"),
    }
}

impl fmt::Display for ThreadLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(&self.targets))
    }
}

impl Serialize for ThreadLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ThreadLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        ThreadLabel::parse(&raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_surface_form() {
        let label = ThreadLabel::parse_for("(24, -)", 25).unwrap();
        assert_eq!(label.targets(), &[LinkTarget::Line(24), LinkTarget::NewThread]);
        assert_eq!(label.to_string(), "(24, -)");
    }

    #[test]
    fn new_thread_marker() {
        let label = ThreadLabel::parse("-").unwrap();
        assert!(label.is_new_thread_only());
    }

    #[test]
    fn forward_link_rejected() {
        assert_eq!(
            ThreadLabel::parse_for("30", 25),
            Err(LabelError::ForwardLink {
                carrier: 25,
                target: 30
            })
        );
        // a self link is not backward either
        assert!(ThreadLabel::parse_for("25", 25).is_err());
    }

    #[test]
    fn canonical_sorts_but_display_keeps_order() {
        let label = ThreadLabel::parse("(-, 24)").unwrap();
        assert_eq!(label.to_string(), "(-, 24)");
        assert_eq!(label.canonical(), "(24, -)");
        let two = ThreadLabel::parse("(9,3)").unwrap();
        assert_eq!(two.canonical(), "(3, 9)");
    }

    #[test]
    fn malformed_labels() {
        for raw in [
            "",
            "()",
            "(1, 2, 3)",
            "(-, -)",
            "(4, 4)",
            "0",
            "x",
            "(3",
            "3)",
            "1.5",
        ] {
            assert!(ThreadLabel::parse(raw).is_err(), "{raw:?} should fail");
        }
    }

    #[test]
    fn serde_uses_surface_form() {
        let label = ThreadLabel::parse("(24, -)").unwrap();
        let json = serde_json::to_string(&label).unwrap();
        assert_eq!(json, "\"(24, -)\"");
        let back: ThreadLabel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, label);
    }
}
