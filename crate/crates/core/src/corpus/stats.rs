use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Code, CorpusEntry, GoldAnnotations, LinkTarget, Transcript};

/// Thread-structure counts for one transcript or a pooled corpus.
///
/// Gap fields are `None` when there are no links. `raw_min_gap` also counts
/// the new-thread half of a split label as a gap of 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadStats {
    pub n_utterances: usize,
    pub n_words: usize,
    pub n_no_thread: usize,
    pub n_links: usize,
    pub mean_gap: Option<f64>,
    pub min_gap: Option<u32>,
    pub max_gap: Option<u32>,
    pub raw_min_gap: Option<u32>,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    n_utterances: usize,
    n_words: usize,
    n_no_thread: usize,
    gap_sum: u64,
    n_links: usize,
    min_gap: Option<u32>,
    max_gap: Option<u32>,
    raw_min_gap: Option<u32>,
}

fn fold_min(slot: &mut Option<u32>, v: u32) {
    *slot = Some(slot.map_or(v, |m| m.min(v)));
}

fn fold_max(slot: &mut Option<u32>, v: u32) {
    *slot = Some(slot.map_or(v, |m| m.max(v)));
}

impl Tally {
    fn add(&mut self, t: &Transcript, g: &GoldAnnotations) {
        self.n_utterances += t.len();
        self.n_words += t
            .utterances
            .iter()
            .map(|u| u.text.split_whitespace().count())
            .sum::<usize>();
        for u in &t.utterances {
            let Some(label) = g.thread.get(&u.index) else {
                continue;
            };
            if label.is_new_thread_only() {
                self.n_no_thread += 1;
                continue;
            }
            for target in label.targets() {
                match *target {
                    LinkTarget::Line(line) => {
                        let gap = u.index.saturating_sub(line);
                        debug_assert!(gap >= 1, "backward links have gap >= 1");
                        self.gap_sum += u64::from(gap);
                        self.n_links += 1;
                        fold_min(&mut self.min_gap, gap);
                        fold_max(&mut self.max_gap, gap);
                        fold_min(&mut self.raw_min_gap, gap);
                    }
                    LinkTarget::NewThread => fold_min(&mut self.raw_min_gap, 0),
                }
            }
        }
    }

    fn merge(&mut self, other: &Tally) {
        self.n_utterances += other.n_utterances;
        self.n_words += other.n_words;
        self.n_no_thread += other.n_no_thread;
        self.gap_sum += other.gap_sum;
        self.n_links += other.n_links;
        if let Some(v) = other.min_gap {
            fold_min(&mut self.min_gap, v);
        }
        if let Some(v) = other.max_gap {
            fold_max(&mut self.max_gap, v);
        }
        if let Some(v) = other.raw_min_gap {
            fold_min(&mut self.raw_min_gap, v);
        }
    }

    fn finish(&self) -> ThreadStats {
        let mean_gap = (self.n_links > 0).then(|| {
            let mean = self.gap_sum as f64 / self.n_links as f64;
            mean.clamp(f64::from(self.min_gap.unwrap()), f64::from(self.max_gap.unwrap()))
        });
        ThreadStats {
            n_utterances: self.n_utterances,
            n_words: self.n_words,
            n_no_thread: self.n_no_thread,
            n_links: self.n_links,
            mean_gap,
            min_gap: self.min_gap,
            max_gap: self.max_gap,
            raw_min_gap: self.raw_min_gap,
        }
    }
}

pub fn thread_stats(t: &Transcript, g: &GoldAnnotations) -> ThreadStats {
    let mut tally = Tally::default();
    tally.add(t, g);
    tally.finish()
}

/// Pooled statistics over a whole corpus, with per-transcript breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_transcripts: usize,
    pub totals: ThreadStats,
    pub mean_utterances_per_dialogue: f64,
    pub mean_words_per_dialogue: f64,
    pub mean_words_per_utterance: f64,
    /// Share of utterances carrying each code.
    pub code_proportions: BTreeMap<String, f64>,
    pub per_transcript: BTreeMap<String, ThreadStats>,
}

pub fn corpus_stats<'a>(entries: impl IntoIterator<Item = &'a CorpusEntry>) -> CorpusStats {
    let mut pooled = Tally::default();
    let mut per_transcript = BTreeMap::new();
    let mut code_counts = [0usize; 5];
    let mut n_transcripts = 0;
    for e in entries {
        n_transcripts += 1;
        let mut tally = Tally::default();
        tally.add(&e.transcript, &e.gold);
        pooled.merge(&tally);
        per_transcript.insert(e.transcript.id.clone(), tally.finish());
        for codes in e.gold.abcde.values() {
            for c in codes.iter() {
                code_counts[c as usize] += 1;
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let code_proportions = Code::ALL
        .iter()
        .map(|c| {
            (
                c.to_string(),
                ratio(code_counts[*c as usize], pooled.n_utterances),
            )
        })
        .collect();
    CorpusStats {
        n_transcripts,
        mean_utterances_per_dialogue: ratio(pooled.n_utterances, n_transcripts),
        mean_words_per_dialogue: ratio(pooled.n_words, n_transcripts),
        mean_words_per_utterance: ratio(pooled.n_words, pooled.n_utterances),
        totals: pooled.finish(),
        code_proportions,
        per_transcript,
    }
}
