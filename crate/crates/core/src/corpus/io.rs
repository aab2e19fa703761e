use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{
    format_timestamp, parse_timestamp, CodeError, CodeSet, CorpusError, GoldAnnotations, LabelError,
    Subcategory, ThreadLabel, Transcript, Utterance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" => Some(Format::Jsonl),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

#[derive(Debug)]
enum Field {
    Str(String),
    Int(i64),
    Other(&'static str),
}

struct Record {
    line: usize,
    fields: HashMap<String, Field>,
}

impl Record {
    fn malformed(&self, reason: impl Into<String>) -> CorpusError {
        CorpusError::MalformedRecord {
            line: self.line,
            reason: reason.into(),
        }
    }

    /// Present and non-blank; empty CSV cells count as absent.
    fn get(&self, name: &str) -> Option<&Field> {
        match self.fields.get(name) {
            Some(Field::Str(s)) if s.trim().is_empty() => None,
            other => other,
        }
    }

    fn index(&self) -> Result<u32, CorpusError> {
        let n = match self.get("index") {
            None => return Err(self.malformed("missing field `index`")),
            Some(Field::Int(n)) => *n,
            Some(Field::Str(s)) => s
                .trim()
                .parse::<i64>()
                .map_err(|_| self.malformed(format!("index {s:?} is not an integer")))?,
            Some(Field::Other(kind)) => {
                return Err(self.malformed(format!("index must be an integer, got {kind}")))
            }
        };
        u32::try_from(n)
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| self.malformed(format!("index {n} must be a positive integer")))
    }

    fn string(&self, name: &str) -> Result<Option<String>, CorpusError> {
        match self.get(name) {
            None => Ok(None),
            Some(Field::Str(s)) => Ok(Some(s.clone())),
            Some(Field::Int(n)) => Ok(Some(n.to_string())),
            Some(Field::Other(kind)) => Err(self.malformed(format!("`{name}` must be a string, got {kind}"))),
        }
    }

    fn required(&self, name: &str) -> Result<String, CorpusError> {
        self.string(name)?
            .ok_or_else(|| self.malformed(format!("missing field `{name}`")))
    }
}

fn json_records(source: &[u8]) -> Result<Vec<Record>, CorpusError> {
    let text = std::str::from_utf8(source).map_err(|e| CorpusError::MalformedRecord {
        line: source[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count() + 1,
        reason: "invalid UTF-8".into(),
    })?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| CorpusError::MalformedRecord {
                line,
                reason: e.to_string(),
            })?;
        let serde_json::Value::Object(map) = value else {
            return Err(CorpusError::MalformedRecord {
                line,
                reason: "record is not a JSON object".into(),
            });
        };
        let fields = map
            .into_iter()
            .filter_map(|(k, v)| {
                let f = match v {
                    serde_json::Value::Null => return None,
                    serde_json::Value::String(s) => Field::Str(s),
                    serde_json::Value::Number(n) => match n.as_i64() {
                        Some(i) => Field::Int(i),
                        None => Field::Other("a non-integer number"),
                    },
                    serde_json::Value::Bool(_) => Field::Other("a boolean"),
                    serde_json::Value::Array(_) => Field::Other("an array"),
                    serde_json::Value::Object(_) => Field::Other("an object"),
                };
                Some((k, f))
            })
            .collect();
        out.push(Record { line, fields });
    }
    Ok(out)
}

fn csv_records(source: &[u8]) -> Result<Vec<Record>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_reader(source);
    let csv_err = |e: csv::Error| CorpusError::MalformedRecord {
        line: e.position().map(|p| p.line() as usize).unwrap_or(1),
        reason: e.to_string(),
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let fields = headers
            .iter()
            .zip(rec.iter())
            .map(|(h, v)| (h.to_string(), Field::Str(v.to_string())))
            .collect();
        out.push(Record { line, fields });
    }
    Ok(out)
}

fn records(source: &[u8], format: Format) -> Result<Vec<Record>, CorpusError> {
    match format {
        Format::Jsonl => json_records(source),
        Format::Csv => csv_records(source),
    }
}

/// Reads a transcript. Source indices must be unique; they are renumbered
/// 1..n in file order.
pub fn parse_transcript(
    source: &[u8],
    format: Format,
    id: &str,
    scenario: &str,
) -> Result<Transcript, CorpusError> {
    let mut seen = HashSet::new();
    let mut utterances = Vec::new();
    let mut last_ts = 0u64;
    for rec in records(source, format)? {
        let source_index = rec.index()?;
        if !seen.insert(source_index) {
            return Err(CorpusError::DuplicateIndex { index: source_index });
        }
        let timestamp_ms = match rec.get("timestamp") {
            None => return Err(rec.malformed("missing field `timestamp`")),
            Some(Field::Int(n)) => u64::try_from(*n).map_err(|_| rec.malformed("negative timestamp"))?,
            Some(Field::Str(s)) => parse_timestamp(s).map_err(|r| rec.malformed(r))?,
            Some(Field::Other(kind)) => {
                return Err(rec.malformed(format!("timestamp must be a string or integer, got {kind}")))
            }
        };
        let speaker = rec.required("speaker")?;
        let text = rec.required("text")?;
        let index = utterances.len() as u32 + 1;
        if timestamp_ms < last_ts {
            return Err(CorpusError::NonMonotonicTimestamp { index });
        }
        last_ts = timestamp_ms;
        utterances.push(Utterance {
            index,
            timestamp_ms,
            speaker,
            text,
        });
    }
    Ok(Transcript {
        id: id.to_string(),
        scenario: scenario.to_string(),
        utterances,
    })
}

/// Reads gold annotations for the transcript named `transcript_id`.
pub fn parse_gold(
    source: &[u8],
    format: Format,
    transcript_id: &str,
) -> Result<GoldAnnotations, CorpusError> {
    let mut gold = GoldAnnotations {
        transcript_id: transcript_id.to_string(),
        ..Default::default()
    };
    for rec in records(source, format)? {
        let index = rec.index()?;
        if gold.thread.contains_key(&index) {
            return Err(CorpusError::DuplicateIndex { index });
        }
        let raw = match rec.string("respond_line")? {
            Some(r) => r,
            None => rec
                .string("thread")?
                .ok_or_else(|| rec.malformed("missing field `respond_line`"))?,
        };
        let label = ThreadLabel::parse_for(&raw, index).map_err(|e| match e {
            LabelError::ForwardLink { target, .. } => CorpusError::ForwardLink { index, target },
            _ => CorpusError::BadThreadSyntax {
                index,
                raw: raw.clone(),
            },
        })?;
        gold.thread.insert(index, label);
        if let Some(raw) = rec.string("abcde")? {
            let codes = CodeSet::parse(&raw).map_err(|e| match e {
                CodeError::UnknownCode(code) => CorpusError::UnknownCode { index, code },
                CodeError::Syntax(raw) => CorpusError::BadCodeSyntax { index, raw },
            })?;
            gold.abcde.insert(index, codes);
        }
        if let Some(raw) = rec.string("subcat")? {
            let tag: Subcategory = raw
                .parse()
                .map_err(|raw| CorpusError::UnknownSubcategory { index, raw })?;
            gold.subcat.insert(index, tag);
        }
    }
    Ok(gold)
}

#[derive(Serialize)]
struct UtteranceRow<'a> {
    index: u32,
    timestamp: String,
    speaker: &'a str,
    text: &'a str,
}

#[derive(Serialize)]
struct GoldRow {
    index: u32,
    respond_line: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    abcde: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    subcat: Option<&'static str>,
}

fn csv_error(e: csv::Error) -> CorpusError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CorpusError::Io(io),
        other => CorpusError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_transcript(t: &Transcript, format: Format, mut out: impl Write) -> Result<(), CorpusError> {
    let rows = t.utterances.iter().map(|u| UtteranceRow {
        index: u.index,
        timestamp: format_timestamp(u.timestamp_ms),
        speaker: &u.speaker,
        text: &u.text,
    });
    match format {
        Format::Jsonl => {
            for row in rows {
                serde_json::to_writer(&mut out, &row).map_err(std::io::Error::from)?;
                out.write_all(b"\n")?;
            }
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(["index", "timestamp", "speaker", "text"])
                .map_err(csv_error)?;
            for row in rows {
                w.serialize(row).map_err(csv_error)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn write_gold(g: &GoldAnnotations, format: Format, mut out: impl Write) -> Result<(), CorpusError> {
    let rows: Vec<GoldRow> = g
        .thread
        .iter()
        .map(|(&index, label)| GoldRow {
            index,
            respond_line: label.to_string(),
            abcde: g.abcde.get(&index).map(|c| c.to_string()),
            subcat: g.subcat.get(&index).map(|s| s.tag()),
        })
        .collect();
    match format {
        Format::Jsonl => {
            for row in &rows {
                serde_json::to_writer(&mut out, row).map_err(std::io::Error::from)?;
                out.write_all(b"\n")?;
            }
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(["index", "respond_line", "abcde", "subcat"])
                .map_err(csv_error)?;
            for row in &rows {
                w.write_record([
                    row.index.to_string(),
                    row.respond_line.clone(),
                    row.abcde.clone().unwrap_or_default(),
                    row.subcat.unwrap_or_default().to_string(),
                ])
                .map_err(csv_error)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
