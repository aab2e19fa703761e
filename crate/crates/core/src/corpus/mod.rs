//! Transcripts, gold annotations, ingestion, validation and descriptive
//! statistics.

mod codes;
mod io;
mod label;
mod stats;
mod timestamp;
mod validate;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codes::{Code, CodeError, CodeSet, Subcategory};
pub use io::{parse_gold, parse_transcript, write_gold, write_transcript, Format};
pub use label::{LabelError, LinkTarget, ThreadLabel};
pub use stats::{corpus_stats, thread_stats, CorpusStats, ThreadStats};
pub use timestamp::{format_timestamp, parse_timestamp};
pub use validate::{validate_thread_graph, HardError, Lexicon, Lint, ValidationConfig, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub index: u32,
    /// Milliseconds from conversation start.
    pub timestamp_ms: u64,
    pub speaker: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    pub scenario: String,
    pub utterances: Vec<Utterance>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Utterance at a 1-based index.
    pub fn get(&self, index: u32) -> Option<&Utterance> {
        if index == 0 {
            return None;
        }
        self.utterances.get(index as usize - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GoldAnnotations {
    pub transcript_id: String,
    pub thread: BTreeMap<u32, ThreadLabel>,
    pub abcde: BTreeMap<u32, CodeSet>,
    pub subcat: BTreeMap<u32, Subcategory>,
}

impl GoldAnnotations {
    /// Checks that every utterance has a thread label and that every line
    /// target exists.
    pub fn check_covers(&self, t: &Transcript) -> Result<(), CorpusError> {
        let n = t.len() as u32;
        for i in 1..=n {
            if !self.thread.contains_key(&i) {
                return Err(CorpusError::MissingLabel {
                    transcript: t.id.clone(),
                    index: i,
                });
            }
        }
        for (&i, label) in &self.thread {
            if i > n {
                return Err(CorpusError::DanglingIndex {
                    transcript: t.id.clone(),
                    index: i,
                });
            }
            for target in label.lines() {
                if target > n {
                    return Err(CorpusError::DanglingIndex {
                        transcript: t.id.clone(),
                        index: target,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("timestamp decreases at utterance {index}")]
    NonMonotonicTimestamp { index: u32 },
    #[error("duplicate utterance index {index}")]
    DuplicateIndex { index: u32 },
    #[error("utterance {index}: bad respond-line value {raw:?}")]
    BadThreadSyntax { index: u32, raw: String },
    #[error("utterance {index} links forward to line {target}")]
    ForwardLink { index: u32, target: u32 },
    #[error("utterance {index}: unknown ABCDE code {code:?}")]
    UnknownCode { index: u32, code: char },
    #[error("utterance {index}: bad ABCDE value {raw:?}")]
    BadCodeSyntax { index: u32, raw: String },
    #[error("utterance {index}: unknown subcategory {raw:?}")]
    UnknownSubcategory { index: u32, raw: String },
    #[error("{transcript}: no thread label for utterance {index}")]
    MissingLabel { transcript: String, index: u32 },
    #[error("{transcript}: reference to missing utterance {index}")]
    DanglingIndex { transcript: String, index: u32 },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<CorpusError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default)]
    pub scenario: String,
    pub transcript: String,
    pub gold: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub transcripts: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub transcript: Transcript,
    pub gold: GoldAnnotations,
}

/// A labeled corpus loaded from a directory holding `manifest.json`.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
}

impl Corpus {
    /// Loads every manifest entry. Per-record errors abort; coverage is left
    /// to [`Corpus::check`] so that a validation pass can still report it.
    pub fn load_dir(dir: &Path) -> Result<Self, CorpusError> {
        let manifest_path = dir.join("manifest.json");
        let raw = fs::read_to_string(&manifest_path)?;
        let manifest: Manifest =
            serde_json::from_str(&raw).map_err(|e| CorpusError::Manifest(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        let mut entries = Vec::with_capacity(manifest.transcripts.len());
        for m in manifest.transcripts {
            if !seen.insert(m.id.clone()) {
                return Err(CorpusError::Manifest(format!("duplicate id {}", m.id)));
            }
            let t_path = dir.join(&m.transcript);
            let g_path = dir.join(&m.gold);
            let transcript = load_file(&t_path, |bytes, fmt| {
                parse_transcript(bytes, fmt, &m.id, &m.scenario)
            })?;
            let gold = load_file(&g_path, |bytes, fmt| parse_gold(bytes, fmt, &m.id))?;
            entries.push(CorpusEntry { transcript, gold });
        }
        Ok(Corpus { entries })
    }

    pub fn check(&self) -> Result<(), CorpusError> {
        for e in &self.entries {
            e.gold.check_covers(&e.transcript)?;
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&CorpusEntry> {
        self.entries.iter().find(|e| e.transcript.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.transcript.id.clone()).collect()
    }
}

fn load_file<T>(
    path: &Path,
    parse: impl FnOnce(&[u8], Format) -> Result<T, CorpusError>,
) -> Result<T, CorpusError> {
    let wrap = |e: CorpusError| CorpusError::File {
        path: path.to_path_buf(),
        source: Box::new(e),
    };
    let fmt = Format::from_path(path).ok_or_else(|| {
        wrap(CorpusError::Manifest(
            "unknown file extension (expected .jsonl or .csv)".into(),
        ))
    })?;
    let bytes = fs::read(path).map_err(|e| wrap(e.into()))?;
    parse(&bytes, fmt).map_err(wrap)
}
