//! Regenerates the replay fixtures under `tests/fixtures/replay/`.
//!
//! Answers come from a simulated model: gold labels degraded by a
//! hash-derived rule and written in a mix of surface forms. The responses
//! are recorded to `responses.jsonl`, then every matrix run is replayed from
//! that file and its eval report is written to `expected/<name>.eval.json`.
//!
//! Run with `cargo run -p threadcode --example freeze_replay`.

use std::path::PathBuf;
use std::sync::Arc;

use threadcode::corpus::{Code, CodeSet, Corpus};
use threadcode::llm::{
    FixtureEntry, LlmError, ModelConfig, OracleProvider, Provider, ProviderKind, RawCompletion,
    ReplayProvider, ResponseStore,
};
use threadcode::prompts::RenderedPrompt;
use threadcode::runner::{evaluate_run, EvalOptions, Matrix, Runner};

struct SimulatedModel {
    oracle: OracleProvider,
}

fn byte(hash: &str, k: usize) -> u8 {
    u8::from_str_radix(&hash[2 * k..2 * k + 2], 16).unwrap()
}

impl SimulatedModel {
    fn thread_line(&self, index: u32, speaker: &str, gold: &str, r: u8) -> String {
        let label = match r % 8 {
            0 if index > 1 => (index - 1).to_string(),
            1 => "-".to_string(),
            _ => gold.to_string(),
        };
        match r / 32 {
            0 => format!("**{index} {speaker}** [respond line = {label}]"),
            1 => format!("Output: {index} {speaker} [respond_line: {label}]"),
            _ => format!("{index} {speaker} [respond line = {label}]"),
        }
    }

    fn code_line(&self, index: u32, speaker: &str, gold: &str, r: u8) -> String {
        let mut codes = CodeSet::parse(gold).unwrap_or_default();
        if r.is_multiple_of(6) {
            codes = codes
                .iter()
                .filter(|c| *c != Code::E)
                .chain((!codes.contains(Code::E)).then_some(Code::E))
                .collect();
        }
        match r / 64 {
            0 => format!("{index} {speaker} {codes}\nThe speaker asks the group for input."),
            _ => format!("{index} {speaker} {codes}"),
        }
    }
}

impl Provider for SimulatedModel {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Replay
    }

    fn call(&self, p: &RenderedPrompt, m: &ModelConfig, hash: &str) -> Result<RawCompletion, LlmError> {
        let gold = self.oracle.call(p, m, hash)?.text;
        let r0 = byte(hash, 0);
        if r0 < 10 {
            return Ok(RawCompletion {
                text: "I'm not able to determine a label for this utterance.".into(),
                input_tokens: None,
                output_tokens: None,
                latency_ms: 0,
                attempts: 1,
            });
        }
        let mut lines = Vec::new();
        for (k, (line, g)) in p.lines.iter().zip(gold.lines()).enumerate() {
            let r = byte(hash, 1 + k % 31) ^ (k as u8).wrapping_mul(37);
            // gold lines end with the label (thread) or the code set
            let label = if p.expected_output.is_thread() {
                g.rsplit_once("= ")
                    .map(|(_, l)| l.trim_end_matches(']'))
                    .unwrap_or("-")
            } else {
                g.rfind('[').map(|at| &g[at..]).unwrap_or("[]")
            };
            let text = if p.expected_output.is_thread() {
                self.thread_line(line.index, &line.speaker, label, r)
            } else {
                self.code_line(line.index, &line.speaker, label, r)
            };
            if p.expected_output.is_block() && r == 7 {
                continue;
            }
            lines.push(text);
        }
        let text = lines.join("\n");
        let with_usage = !r0.is_multiple_of(4);
        let input = (p.text.len() as u64).div_ceil(4) + 11;
        let output = (text.len() as u64).div_ceil(3);
        Ok(RawCompletion {
            text,
            input_tokens: with_usage.then_some(input),
            output_tokens: with_usage.then_some(output),
            latency_ms: 0,
            attempts: 1,
        })
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let replay_dir = root.join("tests/fixtures/replay");
    let corpus = Arc::new(Corpus::load_dir(&root.join("../../data/corpus"))?);
    let matrix = Matrix::load(&replay_dir.join("matrix.json"))?;

    let responses = replay_dir.join("responses.jsonl");
    if responses.exists() {
        std::fs::remove_file(&responses)?;
    }
    let store = Arc::new(ResponseStore::open(&responses)?);
    let simulated = Arc::new(SimulatedModel {
        oracle: OracleProvider::new(corpus.clone()),
    });
    let recorder = Runner::new(corpus.clone(), simulated).with_cache(store.clone());
    for entry in &matrix.runs {
        recorder.run(&entry.spec)?;
    }
    println!("recorded {} responses", store.len());
    drop(recorder);
    drop(store);
    // requests finish in any order and latency is measured; sort and drop
    // latency so regeneration is diff-stable
    let raw = std::fs::read_to_string(&responses)?;
    let mut lines = Vec::new();
    for line in raw.lines() {
        let mut entry: FixtureEntry = serde_json::from_str(line)?;
        entry.latency_ms = None;
        lines.push(serde_json::to_string(&entry)?);
    }
    lines.sort_unstable();
    std::fs::write(&responses, lines.join("\n") + "\n")?;

    let replay = Runner::new(corpus.clone(), Arc::new(ReplayProvider::from_file(&responses)?));
    let expected = replay_dir.join("expected");
    std::fs::create_dir_all(&expected)?;
    for entry in &matrix.runs {
        let log = replay.run(&entry.spec)?;
        let report = evaluate_run(&log, &corpus, &EvalOptions::default())?;
        std::fs::write(
            expected.join(format!("{}.eval.json", entry.name)),
            report.to_json(),
        )?;
        println!(
            "{}: kappa {:.4} over {} transcripts",
            entry.name, report.aggregate.kappa.mean, report.aggregate.n_reports
        );
    }
    Ok(())
}
