mod common;

use proptest::prelude::*;
use serde_json::Value;
use threadcode::corpus::{
    corpus_stats, parse_gold, parse_transcript, thread_stats, validate_thread_graph, write_gold,
    write_transcript, CorpusError, Format, Transcript, Utterance, ValidationConfig,
};

#[test]
fn stats_match_reference_script() {
    let corpus = common::corpus();
    let raw = std::fs::read_to_string(common::fixtures().join("corpus_stats.json")).unwrap();
    let expected: Value = serde_json::from_str(&raw).unwrap();
    let got = serde_json::to_value(corpus_stats(&corpus.entries)).unwrap();
    assert_eq!(got, expected);
    for e in &corpus.entries {
        let per = serde_json::to_value(thread_stats(&e.transcript, &e.gold)).unwrap();
        assert_eq!(
            per, expected["per_transcript"][&e.transcript.id],
            "{}",
            e.transcript.id
        );
    }
}

#[test]
fn bundled_corpus_has_no_hard_errors() {
    let corpus = common::corpus();
    let cfg = ValidationConfig::default();
    for e in &corpus.entries {
        let report = validate_thread_graph(&e.transcript, &e.gold, &cfg);
        assert!(
            report.errors.is_empty(),
            "{}: {:?}",
            e.transcript.id,
            report.errors
        );
    }
}

#[test]
fn bundled_corpus_round_trips_in_both_formats() {
    let corpus = common::corpus();
    for e in &corpus.entries {
        for format in [Format::Jsonl, Format::Csv] {
            let mut t_bytes = Vec::new();
            write_transcript(&e.transcript, format, &mut t_bytes).unwrap();
            let mut g_bytes = Vec::new();
            write_gold(&e.gold, format, &mut g_bytes).unwrap();
            let t = parse_transcript(&t_bytes, format, &e.transcript.id, &e.transcript.scenario).unwrap();
            let g = parse_gold(&g_bytes, format, &e.transcript.id).unwrap();
            assert_eq!(t, e.transcript);
            assert_eq!(g, e.gold);
        }
    }
}

#[test]
fn ingestion_errors_name_the_record() {
    let bad_ts = b"{\"index\": 1, \"timestamp\": \"00:00:05\", \"speaker\": \"A\", \"text\": \"x\"}\n{\"index\": 2, \"timestamp\": \"00:00:04\", \"speaker\": \"B\", \"text\": \"y\"}\n";
    assert!(matches!(
        parse_transcript(bad_ts, Format::Jsonl, "t", ""),
        Err(CorpusError::NonMonotonicTimestamp { index: 2 })
    ));
    let forward = b"index,respond_line\n1,-\n2,3\n3,2\n";
    assert!(matches!(
        parse_gold(forward, Format::Csv, "t"),
        Err(CorpusError::ForwardLink { index: 2, target: 3 })
    ));
}

fn arb_transcript() -> impl Strategy<Value = Transcript> {
    let utterance = ("[A-Za-z][A-Za-z ]{0,10}", "[!-~][ -~]{0,40}", 0u64..100_000);
    prop::collection::vec(utterance, 1..30).prop_map(|rows| {
        let mut ts = 0;
        Transcript {
            id: "p".into(),
            scenario: "s".into(),
            utterances: rows
                .into_iter()
                .enumerate()
                .map(|(k, (speaker, text, step))| {
                    ts += step;
                    Utterance {
                        index: k as u32 + 1,
                        timestamp_ms: ts,
                        speaker: speaker.trim().to_string(),
                        text,
                    }
                })
                .collect(),
        }
    })
}

proptest! {
    #[test]
    fn transcript_write_parse_round_trip(t in arb_transcript(), csv in any::<bool>()) {
        let format = if csv { Format::Csv } else { Format::Jsonl };
        let mut bytes = Vec::new();
        write_transcript(&t, format, &mut bytes).unwrap();
        let back = parse_transcript(&bytes, format, "p", "s").unwrap();
        prop_assert_eq!(back, t);
    }
}
