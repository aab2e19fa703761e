use crate::corpus::{ThreadLabel, Utterance};

pub const TRANSCRIPT_START: &str = "<<<TRANSCRIPT_START>>>";
pub const TRANSCRIPT_END: &str = "<<<TRANSCRIPT_END>>>";
pub const TARGET_START: &str = "<<<TARGET_START>>>";
pub const TARGET_END: &str = "<<<TARGET_END>>>";
pub const EXAMPLE_START: &str = "<<<EXAMPLE_START>>>";
pub const EXAMPLE_END: &str = "<<<EXAMPLE_END>>>";

const LABEL_OPEN: &str = " [respond_line= ";

/// Collapses line breaks so one utterance is one prompt line.
pub fn single_line(text: &str) -> String {
    text.replace("\r\n", " ").replace(['\n', '\r'], " ")
}

/// `#{index} {speaker}: {text}`, plus ` [respond_line= X]` when labeled.
pub fn utterance_line(u: &Utterance, label: Option<&ThreadLabel>) -> String {
    let mut line = format!(
        "#{} {}: {}",
        u.index,
        single_line(&u.speaker),
        single_line(&u.text)
    );
    if let Some(label) = label {
        line.push_str(LABEL_OPEN);
        line.push_str(&label.to_string());
        line.push(']');
    }
    line
}

/// One utterance line recovered from a rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptLine {
    pub index: u32,
    pub speaker: String,
    pub text: String,
    pub label: Option<ThreadLabel>,
}

/// Inverse of [`utterance_line`]. The speaker ends at the first `": "`.
pub fn parse_utterance_line(line: &str) -> Option<PromptLine> {
    let rest = line.strip_prefix('#')?;
    let (index, rest) = rest.split_once(' ')?;
    let index: u32 = index.parse().ok()?;
    let (speaker, mut text) = rest.split_once(": ")?;
    let mut label = None;
    if let Some(body) = text.strip_suffix(']') {
        if let Some(pos) = body.rfind(LABEL_OPEN) {
            if let Ok(parsed) = ThreadLabel::parse(&body[pos + LABEL_OPEN.len()..]) {
                label = Some(parsed);
                text = &body[..pos];
            }
        }
    }
    Some(PromptLine {
        index,
        speaker: speaker.to_string(),
        text: text.to_string(),
        label,
    })
}

/// Text between the first `start` delimiter line and the following `end`
/// delimiter line.
pub fn extract_block<'a>(prompt: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let open = format!("{start}\n");
    let from = prompt.find(&open)? + open.len();
    let rest = &prompt[from..];
    let close = format!("\n{end}");
    let to = rest.find(&close)?;
    Some(&rest[..to])
}

/// Re-reads the utterance lines of the transcript block of a rendered prompt.
pub fn transcript_lines(prompt: &str) -> Option<Vec<PromptLine>> {
    let block = extract_block(prompt, TRANSCRIPT_START, TRANSCRIPT_END)?;
    if block.is_empty() {
        return Some(Vec::new());
    }
    block.split('\n').map(parse_utterance_line).collect()
}
