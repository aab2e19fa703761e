use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{
    estimate_tokens, CompletionRecord, LlmError, ModelConfig, Provider, ProviderKind, RawCompletion,
};
use crate::prompts::RenderedPrompt;

/// One stored response, keyed by prompt hash. Token counts are optional so
/// hand-written fixtures can omit them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub prompt_hash: String,
    pub response_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

impl FixtureEntry {
    pub(crate) fn to_record(&self, prompt_text: &str, provider: ProviderKind) -> CompletionRecord {
        let estimated = self.input_tokens.is_none() || self.output_tokens.is_none();
        CompletionRecord {
            prompt_hash: self.prompt_hash.clone(),
            response_text: self.response_text.clone(),
            input_tokens: self.input_tokens.unwrap_or_else(|| estimate_tokens(prompt_text)),
            output_tokens: self
                .output_tokens
                .unwrap_or_else(|| estimate_tokens(&self.response_text)),
            latency_ms: self.latency_ms.unwrap_or(0),
            provider,
            tokens_estimated: estimated,
            cached: false,
            attempts: 0,
        }
    }
}

/// Hash-keyed response cache, optionally backed by an append-only JSONL
/// file. The first entry for a hash wins.
#[derive(Debug, Default)]
pub struct ResponseStore {
    entries: RwLock<HashMap<String, FixtureEntry>>,
    sink: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl ResponseStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Read-only store from a fixture file.
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let entries = read_entries(path)?;
        Ok(Self {
            entries: RwLock::new(entries),
            sink: None,
            path: Some(path.to_path_buf()),
        })
    }

    /// Loads `path` if it exists and appends new entries to it.
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        let entries = if path.exists() {
            read_entries(path)?
        } else {
            HashMap::new()
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| store_err(path, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| store_err(path, e))?;
        Ok(Self {
            entries: RwLock::new(entries),
            sink: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, hash: &str) -> Option<FixtureEntry> {
        self.entries
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(hash)
            .cloned()
    }

    /// Returns false when the hash was already present.
    pub fn insert(&self, entry: FixtureEntry) -> Result<bool, LlmError> {
        let mut map = self.entries.write().unwrap_or_else(|e| e.into_inner());
        if map.contains_key(&entry.prompt_hash) {
            return Ok(false);
        }
        if let Some(sink) = &self.sink {
            let mut line = serde_json::to_string(&entry).map_err(|e| LlmError::Store(e.to_string()))?;
            line.push('\n');
            let mut f = sink.lock().unwrap_or_else(|e| e.into_inner());
            f.write_all(line.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| LlmError::Store(e.to_string()))?;
        }
        map.insert(entry.prompt_hash.clone(), entry);
        Ok(true)
    }
}

fn store_err(path: &Path, e: std::io::Error) -> LlmError {
    LlmError::Store(format!("{}: {e}", path.display()))
}

fn read_entries(path: &Path) -> Result<HashMap<String, FixtureEntry>, LlmError> {
    let file = File::open(path).map_err(|e| store_err(path, e))?;
    let mut out = HashMap::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| store_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: FixtureEntry = serde_json::from_str(&line)
            .map_err(|e| LlmError::Store(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.entry(entry.prompt_hash.clone()).or_insert(entry);
    }
    Ok(out)
}

/// Serves recorded responses; any unknown prompt is an error.
pub struct ReplayProvider {
    store: Arc<ResponseStore>,
}

impl ReplayProvider {
    pub fn new(store: Arc<ResponseStore>) -> Self {
        Self { store }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::new(Arc::new(ResponseStore::load(path)?)))
    }
}

impl Provider for ReplayProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Replay
    }

    fn call(&self, _: &RenderedPrompt, _: &ModelConfig, hash: &str) -> Result<RawCompletion, LlmError> {
        let entry = self
            .store
            .get(hash)
            .ok_or_else(|| LlmError::FixtureMiss(hash.to_string()))?;
        Ok(RawCompletion {
            text: entry.response_text,
            input_tokens: entry.input_tokens,
            output_tokens: entry.output_tokens,
            latency_ms: entry.latency_ms.unwrap_or(0),
            attempts: 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::tests::prompt;
    use crate::llm::{prompt_hash, LlmClient};

    fn entry(hash: &str, text: &str) -> FixtureEntry {
        FixtureEntry {
            prompt_hash: hash.into(),
            response_text: text.into(),
            input_tokens: Some(3),
            output_tokens: Some(4),
            latency_ms: None,
        }
    }

    #[test]
    fn file_round_trip_first_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/cache.jsonl");
        {
            let store = ResponseStore::open(&path).unwrap();
            assert!(store.insert(entry("h1", "one")).unwrap());
            assert!(!store.insert(entry("h1", "other")).unwrap());
            assert!(store.insert(entry("h2", "two\nlines")).unwrap());
        }
        let reopened = ResponseStore::open(&path).unwrap();
        assert_eq!(reopened.len(), 2);
        assert_eq!(reopened.get("h1").unwrap().response_text, "one");
        assert_eq!(reopened.get("h2").unwrap().response_text, "two\nlines");
    }

    #[test]
    fn replay_hits_and_misses() {
        let store = Arc::new(ResponseStore::in_memory());
        let p = prompt("question");
        let model = ModelConfig::new("m");
        let hash = prompt_hash("m", 0.0, "question");
        store.insert(entry(&hash, "answer")).unwrap();
        let client = LlmClient::new(Arc::new(ReplayProvider::new(store)), model).unwrap();
        let rec = client.complete(&p).unwrap();
        assert_eq!(rec.response_text, "answer");
        assert_eq!((rec.input_tokens, rec.output_tokens), (3, 4));
        assert!(!rec.tokens_estimated);
        assert_eq!(rec.provider, ProviderKind::Replay);
        assert!(matches!(
            client.complete(&prompt("other")),
            Err(LlmError::FixtureMiss(_))
        ));
    }
}
