use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// One ABCDE code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Code {
    /// Agreeing.
    A,
    /// Building on someone else's contribution.
    B,
    /// Chat or comment.
    C,
    /// Differing perspective.
    D,
    /// Eliciting responses or actions.
    E,
}

impl Code {
    pub const ALL: [Code; 5] = [Code::A, Code::B, Code::C, Code::D, Code::E];

    pub fn letter(self) -> char {
        match self {
            Code::A => 'A',
            Code::B => 'B',
            Code::C => 'C',
            Code::D => 'D',
            Code::E => 'E',
        }
    }

    pub fn from_letter(c: char) -> Option<Code> {
        match c {
            'A' => Some(Code::A),
            'B' => Some(Code::B),
            'C' => Some(Code::C),
            'D' => Some(Code::D),
            'E' => Some(Code::E),
            _ => None,
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Code {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Code::from_letter(c).ok_or(CodeError::UnknownCode(c)),
            _ => Err(CodeError::Syntax(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("unknown ABCDE code {0:?}")]
    UnknownCode(char),
    #[error("unrecognised code list {0:?}")]
    Syntax(String),
}

/// A subset of {A, B, C, D, E}; may be empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CodeSet(u8);

impl CodeSet {
    pub fn empty() -> Self {
        CodeSet(0)
    }

    pub fn insert(&mut self, code: Code) {
        self.0 |= code.bit();
    }

    pub fn contains(self, code: Code) -> bool {
        self.0 & code.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Code> {
        Code::ALL.into_iter().filter(move |c| self.contains(*c))
    }

    /// Parses `[A, C]`, `[]`, `A,C` or `AC`. Letters repeat freely; only
    /// `A`-`E` are accepted.
    pub fn parse(raw: &str) -> Result<Self, CodeError> {
        let trimmed = raw.trim();
        let inner = match (trimmed.strip_prefix('['), trimmed.strip_suffix(']')) {
            (Some(_), Some(_)) if trimmed.len() >= 2 => &trimmed[1..trimmed.len() - 1],
            (None, None) => trimmed,
            _ => return Err(CodeError::Syntax(raw.to_string())),
        };
        let mut set = CodeSet::empty();
        for c in inner.chars() {
            if c == ',' || c.is_whitespace() {
                continue;
            }
            set.insert(Code::from_letter(c).ok_or(CodeError::UnknownCode(c))?);
        }
        Ok(set)
    }

    /// Sorted letters (`"AC"`), or `[]` for the empty set.
    pub fn canonical(self) -> String {
        if self.is_empty() {
            return "[]".to_string();
        }
        self.iter().map(Code::letter).collect()
    }
}

impl FromIterator<Code> for CodeSet {
    fn from_iter<I: IntoIterator<Item = Code>>(iter: I) -> Self {
        let mut set = CodeSet::empty();
        for c in iter {
            set.insert(c);
        }
        set
    }
}

impl fmt::Display for CodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, c) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

impl Serialize for CodeSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CodeSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        CodeSet::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// Threading subcategory of an annotated utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subcategory {
    /// Adjacency pair.
    AP,
    /// Explicit coherence relation.
    E,
    /// Implicit coherence relation.
    I,
    /// Topic transition.
    TT,
    /// Consensus information.
    CI,
    /// Backchannel response.
    BC,
    /// Self continuation.
    SC,
}

impl Subcategory {
    pub const ALL: [Subcategory; 7] = [
        Subcategory::AP,
        Subcategory::E,
        Subcategory::I,
        Subcategory::TT,
        Subcategory::CI,
        Subcategory::BC,
        Subcategory::SC,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Subcategory::AP => "AP",
            Subcategory::E => "E",
            Subcategory::I => "I",
            Subcategory::TT => "TT",
            Subcategory::CI => "CI",
            Subcategory::BC => "BC",
            Subcategory::SC => "SC",
        }
    }
}

impl fmt::Display for Subcategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Subcategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Subcategory::ALL
            .into_iter()
            .find(|c| c.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| s.to_string())
    }
}
