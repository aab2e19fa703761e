//! Agreement metrics over categorical label sequences.
//!
//! Labels are compared as exact values, so a split thread label that matches
//! only one of its two targets counts as wrong. Unparseable predictions enter
//! as [`PARSE_FAILURE`], which never equals a gold label.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Code, CodeSet, Subcategory, ThreadLabel};

/// Class used for a prediction that could not be parsed.
pub const PARSE_FAILURE: &str = "\u{27C2}";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("gold has {gold} items but prediction has {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("no items to score")]
    EmptyInput,
    #[error("no position carries subcategory {0}")]
    EmptyCategory(Subcategory),
}

/// Comparison key for a thread prediction.
pub fn thread_key(label: Option<&ThreadLabel>) -> String {
    label.map_or_else(|| PARSE_FAILURE.to_string(), ThreadLabel::canonical)
}

/// Comparison key for a code-set prediction.
pub fn code_key(codes: Option<CodeSet>) -> String {
    codes.map_or_else(|| PARSE_FAILURE.to_string(), CodeSet::canonical)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub kappa: f64,
    pub n: usize,
    pub class_count: usize,
}

fn check<T>(gold: &[T], pred: &[T]) -> Result<(), MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    Ok(())
}

#[derive(Default, Clone, Copy)]
struct ClassCounts {
    hit: u64,
    gold: u64,
    pred: u64,
}

struct Tally {
    n: u64,
    matches: u64,
    classes: Vec<ClassCounts>,
}

fn tally<T: Ord>(gold: &[T], pred: &[T]) -> Tally {
    let mut by_class: BTreeMap<&T, ClassCounts> = BTreeMap::new();
    let mut matches = 0;
    for (g, p) in gold.iter().zip(pred) {
        by_class.entry(g).or_default().gold += 1;
        by_class.entry(p).or_default().pred += 1;
        if g == p {
            matches += 1;
            by_class.get_mut(g).unwrap().hit += 1;
        }
    }
    Tally {
        n: gold.len() as u64,
        matches,
        classes: by_class.into_values().collect(),
    }
}

impl Tally {
    fn accuracy(&self) -> f64 {
        self.matches as f64 / self.n as f64
    }

    fn macro_f1(&self) -> f64 {
        // F1 = 2PR / (P + R) = 2 hit / (gold + pred); zero when hit is zero
        let sum: f64 = self
            .classes
            .iter()
            .map(|c| {
                if c.hit == 0 {
                    0.0
                } else {
                    (2 * c.hit) as f64 / (c.gold + c.pred) as f64
                }
            })
            .sum();
        sum / self.classes.len() as f64
    }

    fn kappa(&self) -> f64 {
        // (p_o - p_e) / (1 - p_e) with both terms scaled by n^2
        let n = i128::from(self.n);
        let chance: i128 = self
            .classes
            .iter()
            .map(|c| i128::from(c.gold) * i128::from(c.pred))
            .sum();
        let denom = n * n - chance;
        if denom == 0 {
            return if self.matches == self.n { 1.0 } else { 0.0 };
        }
        let numer = n * i128::from(self.matches) - chance;
        (numer as f64 / denom as f64).clamp(-1.0, 1.0)
    }
}

pub fn accuracy<T: Ord>(gold: &[T], pred: &[T]) -> Result<f64, MetricError> {
    check(gold, pred)?;
    Ok(tally(gold, pred).accuracy())
}

/// Unweighted mean of per-class F1 over every label seen in either sequence.
pub fn macro_f1<T: Ord>(gold: &[T], pred: &[T]) -> Result<f64, MetricError> {
    check(gold, pred)?;
    Ok(tally(gold, pred).macro_f1())
}

/// Cohen's kappa; when chance agreement is total the result is 1 for perfect
/// agreement and 0 otherwise.
pub fn cohens_kappa<T: Ord>(gold: &[T], pred: &[T]) -> Result<f64, MetricError> {
    check(gold, pred)?;
    Ok(tally(gold, pred).kappa())
}

pub fn evaluate<T: Ord>(gold: &[T], pred: &[T]) -> Result<MetricReport, MetricError> {
    check(gold, pred)?;
    let t = tally(gold, pred);
    Ok(MetricReport {
        accuracy: t.accuracy(),
        macro_f1: t.macro_f1(),
        kappa: t.kappa(),
        n: gold.len(),
        class_count: t.classes.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub values: Vec<f64>,
}

impl Summary {
    pub fn of(values: Vec<f64>) -> Result<Self, MetricError> {
        if values.is_empty() {
            return Err(MetricError::EmptyInput);
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        let n = sorted.len() as f64;
        let mean = (sorted.iter().sum::<f64>() / n).clamp(lo, hi);
        let std = if sorted.len() == 1 || lo == hi {
            0.0
        } else {
            let ss: f64 = sorted.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        };
        Ok(Self { mean, std, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub accuracy: Summary,
    pub macro_f1: Summary,
    pub kappa: Summary,
    pub n_reports: usize,
}

pub fn aggregate(reports: &[MetricReport]) -> Result<AggregateReport, MetricError> {
    let pick = |f: fn(&MetricReport) -> f64| Summary::of(reports.iter().map(f).collect());
    Ok(AggregateReport {
        accuracy: pick(|r| r.accuracy)?,
        macro_f1: pick(|r| r.macro_f1)?,
        kappa: pick(|r| r.kappa)?,
        n_reports: reports.len(),
    })
}

/// Metrics restricted to positions whose 1-based index carries `tag`.
pub fn subcategory_slice<T: Ord + Clone>(
    gold: &[T],
    pred: &[T],
    subcat: &BTreeMap<u32, Subcategory>,
    tag: Subcategory,
) -> Result<MetricReport, MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let (g, p): (Vec<T>, Vec<T>) = (0..gold.len())
        .filter(|pos| subcat.get(&(*pos as u32 + 1)) == Some(&tag))
        .map(|pos| (gold[pos].clone(), pred[pos].clone()))
        .unzip();
    if g.is_empty() {
        return Err(MetricError::EmptyCategory(tag));
    }
    evaluate(&g, &p)
}

/// Presence/absence of one code; a missing prediction is its own class.
pub fn binary_code_metrics(
    gold: &[CodeSet],
    pred: &[Option<CodeSet>],
    code: Code,
) -> Result<MetricReport, MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let side = |c: CodeSet| if c.contains(code) { "present" } else { "absent" };
    let g: Vec<&str> = gold.iter().map(|c| side(*c)).collect();
    let p: Vec<&str> = pred.iter().map(|c| c.map_or(PARSE_FAILURE, side)).collect();
    evaluate(&g, &p)
}
