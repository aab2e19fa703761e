use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use threadcode::llm::{ModelConfig, ProviderKind, RetryPolicy};
use threadcode::outparse::Strictness;
use threadcode::runner::HumanBaseline;

/// Settings read from `--config`. Every field has a default so the file may
/// name only what it changes. API keys are never read from here; the model
/// block names the environment variable that holds one.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub corpus: PathBuf,
    /// Root for `runs/` and `reports/`.
    pub out: PathBuf,
    pub provider: ProviderKind,
    pub model: ModelConfig,
    /// Response fixtures served by the replay provider.
    pub fixtures: Option<PathBuf>,
    /// Append-only response cache shared across runs.
    pub cache: Option<PathBuf>,
    pub pricing: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub retry: RetryPolicy,
    pub concurrency: Concurrency,
    pub strictness: Strictness,
    pub log_prompts: bool,
    pub human_baseline: HumanBaseline,
    pub lexicon: Option<PathBuf>,
    pub long_gap: u32,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Concurrency {
    pub transcripts: usize,
    pub requests: usize,
}

impl Default for Concurrency {
    fn default() -> Self {
        Self {
            transcripts: 4,
            requests: 8,
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self {
            corpus: PathBuf::from("data/corpus"),
            out: PathBuf::from("."),
            provider: ProviderKind::Http,
            model: ModelConfig::new("gpt-4.1"),
            fixtures: None,
            cache: None,
            pricing: None,
            templates: None,
            retry: RetryPolicy::default(),
            concurrency: Concurrency::default(),
            strictness: Strictness::default(),
            log_prompts: false,
            human_baseline: HumanBaseline::default(),
            lexicon: None,
            long_gap: 13,
        }
    }
}

impl Config {
    /// Reads a JSON config. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Config =
            serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.corpus);
        fix(&mut cfg.out);
        for p in [
            &mut cfg.fixtures,
            &mut cfg.cache,
            &mut cfg.pricing,
            &mut cfg.templates,
            &mut cfg.lexicon,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.out.join("runs")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out.join("reports")
    }
}
