//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;

use common::golden;
use common::{corpus, model, NoisyProvider};
use threadcode::corpus::{
    corpus_stats, thread_stats, Code, CodeSet, Corpus, CorpusEntry, GoldAnnotations, LinkTarget, ThreadLabel,
    Transcript, Utterance,
};
use threadcode::llm::{HttpProvider, OracleProvider, PricingTable, ReplayProvider, RetryPolicy};
use threadcode::metrics::{accuracy, cohens_kappa, macro_f1};
use threadcode::outparse::{parse_code_response, parse_thread_response, ParseOutcome, Strictness};
use threadcode::prompts::{TemplateId, TemplateSet, TARGET_START, TRANSCRIPT_START};
use threadcode::runner::{
    check_self_feed_trace, evaluate_run, tradeoff_report, Axis, EvalOptions, ExperimentSpec, HumanBaseline,
    Matrix, Runner, Strategy, ThreadSource,
};
use threadcode::windowing::{make_window, window_sequence, Feedback, WindowConfig};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Verdict;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let held: bool = $cond;
        if !held {
            return Verdict::Fail(format!($($msg)+));
        }
    }};
}

fn main() -> ExitCode {
    let checks: [(&str, &str, Check); 10] = [
        ("AC-1", "metric oracle equivalence", metric_oracle),
        ("AC-2", "kappa hand checks", kappa_hand_checks),
        ("AC-3", "oracle end to end", oracle_end_to_end),
        ("AC-4", "replay determinism", replay_determinism),
        ("AC-5", "golden prompts", golden_prompts),
        ("AC-6", "parser round trip", parser_round_trip),
        ("AC-7", "windowing invariants", windowing_invariants),
        ("AC-8", "corpus statistics", corpus_statistics),
        ("AC-9", "tradeoff report", tradeoff),
        ("AC-10", "live smoke test", live_smoke),
    ];
    let mut failed = 0;
    for (id, name, check) in checks {
        let verdict = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| Verdict::Fail(format!("panicked: {}", panic_message(&e))));
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Skip(d) => ("SKIP", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{id:<6} {tag}  {name}: {detail}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

// -- AC-1 ---------------------------------------------------------------

struct Reference {
    accuracy: f64,
    macro_f1: f64,
    kappa: f64,
}

/// Scores from an explicit confusion matrix over the classes seen in either
/// sequence.
fn brute_force(gold: &[u8], pred: &[u8]) -> Reference {
    let classes: Vec<u8> = gold
        .iter()
        .chain(pred)
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let k = classes.len();
    let pos = |c: u8| classes.iter().position(|&x| x == c).unwrap();
    let mut m = vec![vec![0usize; k]; k];
    for (g, p) in gold.iter().zip(pred) {
        m[pos(*g)][pos(*p)] += 1;
    }
    let n = gold.len() as f64;
    let row = |i: usize| m[i].iter().sum::<usize>() as f64;
    let col = |j: usize| m.iter().map(|r| r[j]).sum::<usize>() as f64;
    let diag: f64 = (0..k).map(|i| m[i][i] as f64).sum();

    let po = diag / n;
    let pe: f64 = (0..k).map(|i| row(i) * col(i)).sum::<f64>() / (n * n);
    let kappa = if pe == 1.0 {
        if po == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (po - pe) / (1.0 - pe)
    };

    let f1 = |i: usize| {
        let tp = m[i][i] as f64;
        if tp == 0.0 {
            return 0.0;
        }
        let precision = tp / col(i);
        let recall = tp / row(i);
        2.0 * precision * recall / (precision + recall)
    };
    let macro_f1 = (0..k).map(f1).sum::<f64>() / k as f64;
    Reference {
        accuracy: po,
        macro_f1,
        kappa,
    }
}

fn metric_oracle() -> Verdict {
    const INSTANCES: usize = 5_000;
    let mut rng = StdRng::seed_from_u64(0xACE1);
    let started = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..INSTANCES {
        let n = rng.random_range(1..=20);
        let k = rng.random_range(1..=5u8);
        // a skewed pred draw makes partial agreement common
        let gold: Vec<u8> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<u8> = gold
            .iter()
            .map(|&g| {
                if rng.random_bool(0.5) {
                    g
                } else {
                    rng.random_range(0..k)
                }
            })
            .collect();
        let names = |v: &[u8]| v.iter().map(|c| format!("c{c}")).collect::<Vec<_>>();
        let (g, p) = (names(&gold), names(&pred));
        let want = brute_force(&gold, &pred);
        let got = [
            accuracy(&g, &p).unwrap(),
            macro_f1(&g, &p).unwrap(),
            cohens_kappa(&g, &p).unwrap(),
        ];
        for (got, want, metric) in [
            (got[0], want.accuracy, "accuracy"),
            (got[1], want.macro_f1, "macro-F1"),
            (got[2], want.kappa, "kappa"),
        ] {
            let err = (got - want).abs();
            worst = worst.max(err);
            ensure!(
                err <= 1e-12,
                "case {case} {metric}: {got} vs {want} (gold {gold:?}, pred {pred:?})"
            );
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Verdict::Pass(format!(
        "{INSTANCES} instances, max abs error {worst:.1e}, {elapsed:.2?}"
    ))
}

// -- AC-2 ---------------------------------------------------------------

fn kappa_hand_checks() -> Verdict {
    let k = cohens_kappa(&["A", "A", "B", "B"], &["A", "B", "A", "B"]).unwrap();
    ensure!(k == 0.0, "chance-level pair gave {k}");
    for seq in [
        vec!["A", "B"],
        vec!["A", "B", "B", "C", "A"],
        vec!["x", "y", "z", "x"],
    ] {
        let k = cohens_kappa(&seq, &seq).unwrap();
        ensure!(k == 1.0, "identical {seq:?} gave {k}");
    }
    Verdict::Pass("0.0 and 1.0 exactly".into())
}

// -- AC-3 ---------------------------------------------------------------

fn oracle_end_to_end() -> Verdict {
    let started = Instant::now();
    let c = corpus();
    let r = Runner::new(c.clone(), Arc::new(OracleProvider::new(c.clone())));
    let runs = [
        (ExperimentSpec::threading_window(model(), 10), vec![Code::E]),
        (
            ExperimentSpec::abcde(model(), Strategy::Window, 10, ThreadSource::Human),
            Code::ALL.to_vec(),
        ),
    ];
    let mut scored = 0;
    for (spec, codes) in runs {
        let log = match r.run(&spec) {
            Ok(log) => log,
            Err(e) => return Verdict::Fail(format!("{}: {e}", spec.condition())),
        };
        ensure!(
            log.failures.is_empty(),
            "{}: failures {:?}",
            spec.condition(),
            log.failures
        );
        for code in codes {
            let eval = evaluate_run(
                &log,
                &c,
                &EvalOptions {
                    code,
                    ..Default::default()
                },
            )
            .unwrap();
            ensure!(
                eval.per_transcript.len() == c.entries.len(),
                "missing transcripts"
            );
            for (id, m) in &eval.per_transcript {
                ensure!(
                    (m.accuracy, m.macro_f1, m.kappa) == (1.0, 1.0, 1.0),
                    "{} {id}: {m:?}",
                    spec.condition()
                );
                scored += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Verdict::Pass(format!("{scored} conversation scores all 1.0, {elapsed:.2?}"))
}

// -- AC-4 ---------------------------------------------------------------

fn replay_determinism() -> Verdict {
    let dir = common::fixtures().join("replay");
    let matrix = Matrix::load(&dir.join("matrix.json")).unwrap();
    let c = corpus();
    for round in 1..=3 {
        let provider = ReplayProvider::from_file(&dir.join("responses.jsonl")).unwrap();
        let r = Runner::new(c.clone(), Arc::new(provider));
        for entry in &matrix.runs {
            let log = match r.run(&entry.spec) {
                Ok(log) => log,
                Err(e) => return Verdict::Fail(format!("round {round} {}: {e}", entry.name)),
            };
            ensure!(
                log.failures.is_empty(),
                "round {round} {}: {:?}",
                entry.name,
                log.failures
            );
            let got = evaluate_run(&log, &c, &EvalOptions::default()).unwrap().to_json();
            let want = std::fs::read(dir.join(format!("expected/{}.eval.json", entry.name))).unwrap();
            ensure!(
                got.as_bytes() == want,
                "round {round} {} differs from frozen report",
                entry.name
            );
        }
    }
    Verdict::Pass(format!("{} runs byte-identical over 3 rounds", matrix.runs.len()))
}

// -- AC-5 ---------------------------------------------------------------

fn golden_prompts() -> Verdict {
    let (input, data) = golden::load();
    let mut covered = BTreeSet::new();
    for case in &input.cases {
        let got = golden::render(case, &data);
        ensure!(
            got.text == golden::expected(case),
            "{} differs from its frozen rendering",
            case.name
        );
        ensure!(
            got.text.contains(TRANSCRIPT_START),
            "{} lacks the transcript delimiter",
            case.name
        );
        let n = data[&case.transcript].0.len();
        match case.template {
            TemplateId::AbcdeWindowPlain | TemplateId::AbcdeWindowThreaded => {
                ensure!(
                    got.text.contains(TARGET_START),
                    "{} lacks the target delimiter",
                    case.name
                );
            }
            TemplateId::AbcdeFullPlain | TemplateId::AbcdeFullThreaded | TemplateId::ThreadAllAtOnce => {
                let wanted = format!("EXACTLY {n} label lines");
                ensure!(got.text.contains(&wanted), "{} lacks {wanted:?}", case.name);
            }
            _ => {}
        }
        covered.insert(case.template);
    }
    ensure!(
        covered.len() == TemplateId::ALL.len(),
        "only {} of {} templates covered",
        covered.len(),
        TemplateId::ALL.len()
    );
    Verdict::Pass(format!("{} cases over all 9 templates", input.cases.len()))
}

// -- AC-6 ---------------------------------------------------------------

fn random_label(rng: &mut StdRng, carrier: u32) -> ThreadLabel {
    let line = |rng: &mut StdRng| LinkTarget::Line(rng.random_range(1..carrier));
    if carrier == 1 {
        return ThreadLabel::new_thread();
    }
    let targets = match rng.random_range(0..4) {
        0 => vec![LinkTarget::NewThread],
        1 => vec![line(rng)],
        2 => {
            let t = vec![line(rng), LinkTarget::NewThread];
            if rng.random_bool(0.5) {
                t.into_iter().rev().collect()
            } else {
                t
            }
        }
        _ => {
            let a = line(rng);
            let mut b = line(rng);
            if carrier == 2 {
                b = LinkTarget::NewThread;
            }
            while b == a {
                b = line(rng);
            }
            vec![a, b]
        }
    };
    ThreadLabel::from_targets(targets).unwrap()
}

fn random_codes(rng: &mut StdRng) -> CodeSet {
    Code::ALL.into_iter().filter(|_| rng.random_bool(0.4)).collect()
}

fn parser_round_trip() -> Verdict {
    const N: usize = 10_000;
    let mut rng = StdRng::seed_from_u64(0xACE6);
    let speakers = ["Serena", "Oscar", "Mei", "J.P.", "Anne-Marie", "Kofi"];
    for _ in 0..N {
        let carrier = rng.random_range(1..=400u32);
        let speaker = speakers[rng.random_range(0..speakers.len())];
        let label = random_label(&mut rng, carrier);
        let codes = random_codes(&mut rng);
        for strictness in [Strictness::Strict, Strictness::Lenient] {
            let line = format!("{carrier} {speaker} [respond line = {label}]");
            match parse_thread_response(&line, carrier, speaker, strictness) {
                ParseOutcome::Ok(p) => ensure!(p.label == label, "{line:?} parsed to {}", p.label),
                other => return Verdict::Fail(format!("{line:?}: {other:?}")),
            }
            let line = format!("{carrier} {speaker} {codes}");
            match parse_code_response(&line, carrier, speaker, strictness) {
                ParseOutcome::Ok(p) => ensure!(p.codes == codes, "{line:?} parsed to {}", p.codes),
                other => return Verdict::Fail(format!("{line:?}: {other:?}")),
            }
        }
    }

    let split = ThreadLabel::parse("(24, -)").unwrap();
    ensure!(
        split.targets() == [LinkTarget::Line(24), LinkTarget::NewThread],
        "(24, -) parsed to {split}"
    );
    let fresh = ThreadLabel::parse("-").unwrap();
    ensure!(fresh.is_new_thread_only(), "- parsed to {fresh}");
    let in_line = parse_thread_response("25 Mei [respond line = (24, -)]", 25, "Mei", Strictness::Strict);
    ensure!(
        in_line.ok().map(|p| &p.label) == Some(&split),
        "split label inside an answer line"
    );
    let e_only: CodeSet = [Code::E].into_iter().collect();
    match parse_code_response("10 Serena [E]", 10, "Serena", Strictness::Strict) {
        ParseOutcome::Ok(p) => ensure!(
            p.codes == e_only && p.index == 10 && p.speaker == "Serena",
            "10 Serena [E] parsed to {p:?}"
        ),
        other => return Verdict::Fail(format!("10 Serena [E]: {other:?}")),
    }
    match parse_code_response("2 Oscar []", 2, "Oscar", Strictness::Strict) {
        ParseOutcome::Ok(p) => ensure!(p.codes.is_empty() && p.index == 2, "2 Oscar [] parsed to {p:?}"),
        other => return Verdict::Fail(format!("2 Oscar []: {other:?}")),
    }
    Verdict::Pass(format!(
        "{N} labels and code sets, both strictness modes, 4 surface forms"
    ))
}

// -- AC-7 ---------------------------------------------------------------

fn synthetic_entry(rng: &mut StdRng, id: &str, len: u32) -> CorpusEntry {
    let speakers = ["Ana", "Ben", "Chloe", "Dev", "Eli"];
    let mut ts = 0u64;
    let utterances = (1..=len)
        .map(|index| {
            ts += rng.random_range(500..20_000);
            Utterance {
                index,
                timestamp_ms: ts,
                speaker: speakers[rng.random_range(0..speakers.len())].to_string(),
                text: format!("remark number {index} about the task"),
            }
        })
        .collect();
    let thread = (1..=len).map(|i| (i, random_label(rng, i))).collect();
    let abcde = (1..=len).map(|i| (i, random_codes(rng))).collect();
    CorpusEntry {
        transcript: Transcript {
            id: id.to_string(),
            scenario: "synthetic".into(),
            utterances,
        },
        gold: GoldAnnotations {
            transcript_id: id.to_string(),
            thread,
            abcde,
            subcat: BTreeMap::new(),
        },
    }
}

fn windowing_invariants() -> Verdict {
    let mut rng = StdRng::seed_from_u64(0xACE7);
    let sizes = [2usize, 10, 20, 30];
    let mut windows = 0usize;
    for trial in 0..60 {
        let len = rng.random_range(1..=200);
        let entry = synthetic_entry(&mut rng, &format!("w{trial}"), len);
        let t = &entry.transcript;
        for &n in &sizes {
            let expected = |i: u32| -> Vec<u32> { ((i + 1).saturating_sub(n as u32).max(1)..i).collect() };
            for feedback in [Feedback::None, Feedback::Gold] {
                let cfg = WindowConfig::new(n, feedback).unwrap();
                let seq = window_sequence(t, cfg, |j| entry.gold.thread.get(&j).cloned());
                let mut seen = 0;
                for (k, w) in seq.enumerate() {
                    let w = w.unwrap();
                    let i = k as u32 + 1;
                    ensure!(w.target_index == i, "sequence out of order at {i}");
                    ensure!(
                        w.context_indices() == expected(i),
                        "len {len} n={n} i={i}: {:?}",
                        w.context_indices()
                    );
                    for c in &w.context {
                        let want = (feedback == Feedback::Gold)
                            .then(|| entry.gold.thread[&c.utterance.index].clone());
                        ensure!(
                            c.label == want,
                            "n={n} i={i}: wrong context label at {}",
                            c.utterance.index
                        );
                    }
                    seen += 1;
                }
                ensure!(seen == t.len(), "sequence yielded {seen} of {} windows", t.len());
                windows += seen;
            }
            let cfg = WindowConfig::new(n, Feedback::None).unwrap();
            let i = rng.random_range(1..=len);
            let w = make_window(t, i, &cfg, &BTreeMap::new()).unwrap();
            ensure!(
                w.context_indices() == expected(i),
                "make_window len {len} n={n} i={i}"
            );
        }
    }

    let entries = (0..8)
        .map(|k| {
            let len = rng.random_range(1..=200);
            synthetic_entry(&mut rng, &format!("s{k}"), len)
        })
        .collect();
    let synthetic = Arc::new(Corpus { entries });
    let templates = TemplateSet::builtin();
    let r = Runner::new(synthetic.clone(), Arc::new(NoisyProvider::new(synthetic.clone())))
        .with_prompt_logging(true);
    let mut traced = 0;
    for n in sizes {
        let log = r.run(&ExperimentSpec::threading_window(model(), n)).unwrap();
        ensure!(log.failures.is_empty(), "n={n}: {:?}", log.failures);
        let violations = check_self_feed_trace(&log, &synthetic, &templates);
        ensure!(
            violations.is_empty(),
            "n={n}: {} trace violations, first {:?}",
            violations.len(),
            violations[0]
        );
        traced += log.utterances.len();
    }
    Verdict::Pass(format!(
        "{windows} windows checked, {traced} self-fed predictions traced"
    ))
}

// -- AC-8 ---------------------------------------------------------------

fn corpus_statistics() -> Verdict {
    let c = corpus();
    let raw = std::fs::read_to_string(common::fixtures().join("corpus_stats.json")).unwrap();
    let expected: Value = serde_json::from_str(&raw).unwrap();
    let got = serde_json::to_value(corpus_stats(&c.entries)).unwrap();
    ensure!(got == expected, "corpus-wide statistics differ");
    for e in &c.entries {
        let per = serde_json::to_value(thread_stats(&e.transcript, &e.gold)).unwrap();
        ensure!(
            per == expected["per_transcript"][&e.transcript.id],
            "{} differs",
            e.transcript.id
        );
    }
    Verdict::Pass(format!(
        "{} transcripts match the reference fixture",
        c.entries.len()
    ))
}

// -- AC-9 ---------------------------------------------------------------

fn tradeoff() -> Verdict {
    let c = corpus();
    let r = Runner::new(c.clone(), Arc::new(NoisyProvider::new(c.clone())));
    let pricing =
        PricingTable::from_json(r#"{"gpt-4.1": {"input_per_1m": 2.0, "output_per_1m": 8.0}}"#).unwrap();
    let a = r.run(&ExperimentSpec::threading_window(model(), 10)).unwrap();
    let b = r.run(&ExperimentSpec::threading_all_at_once(model(), 1)).unwrap();
    let ea = evaluate_run(&a, &c, &EvalOptions::default()).unwrap();
    let eb = evaluate_run(&b, &c, &EvalOptions::default()).unwrap();
    let table = tradeoff_report(&[(&a, &ea), (&b, &eb)], &HumanBaseline::default(), Some(&pricing));

    let csv = table.to_csv();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    ensure!(rows.len() == 3, "{} data rows", rows.len());
    let field = |row: &csv::StringRecord, name: &str| -> f64 {
        let at = headers.iter().position(|h| h == name).unwrap();
        row[at].parse().unwrap()
    };
    let human = &rows[2];
    ensure!(human[0].starts_with("human"), "last row is {:?}", &human[0]);
    ensure!(
        field(human, "usd_per_transcript") == 25.0,
        "human cost {}",
        &human[5]
    );
    ensure!(
        field(human, "hours_per_transcript") == 1.5,
        "human time {}",
        &human[3]
    );
    for axis in [Axis::Time, Axis::Cost] {
        let svg = table.to_svg(axis);
        let points = svg.matches("class=\"point\"").count();
        ensure!(points == rows.len(), "{axis:?} plot has {points} points");
    }
    Verdict::Pass("3 rows, human row $25.00 and 1.5 h, one point per row".into())
}

// -- AC-10 --------------------------------------------------------------

fn live_smoke() -> Verdict {
    let Some(model_id) = std::env::var("OPENAI_API_KEY")
        .ok()
        .map(|_| std::env::var("THREADCODE_LIVE_MODEL").unwrap_or_else(|_| "gpt-4.1".to_string()))
    else {
        return Verdict::Skip("OPENAI_API_KEY not set".into());
    };
    let c = corpus();
    let mut spec = ExperimentSpec::threading_window(threadcode::llm::ModelConfig::new(&model_id), 10);
    spec.transcripts = vec![c.entries[0].transcript.id.clone()];
    let provider = match HttpProvider::from_env(&spec.model, RetryPolicy::default()) {
        Ok(p) => p,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let log = match Runner::new(c.clone(), Arc::new(provider)).run(&spec) {
        Ok(log) => log,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let eval = evaluate_run(&log, &c, &EvalOptions::default()).unwrap();
    let kappa = eval.aggregate.kappa.mean;
    ensure!(
        kappa > 0.4,
        "{model_id} kappa {kappa:.4} on {}",
        spec.transcripts[0]
    );
    Verdict::Pass(format!("{model_id} kappa {kappa:.4} on {}", spec.transcripts[0]))
}
