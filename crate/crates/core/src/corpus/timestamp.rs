/// Parses `HH:MM:SS`, `MM:SS` (either with optional `.fff`) or a bare
/// millisecond count into milliseconds.
pub fn parse_timestamp(raw: &str) -> Result<u64, String> {
    let s = raw.trim();
    if s.is_empty() {
        return Err("empty timestamp".into());
    }
    if s.bytes().all(|b| b.is_ascii_digit()) {
        return s.parse().map_err(|_| format!("timestamp {s:?} out of range"));
    }
    let (clock, frac) = match s.split_once('.') {
        Some((c, f)) => (c, Some(f)),
        None => (s, None),
    };
    let parts: Vec<&str> = clock.split(':').collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(format!("unrecognised timestamp {raw:?}"));
    }
    let mut nums = Vec::with_capacity(3);
    for p in &parts {
        if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("unrecognised timestamp {raw:?}"));
        }
        nums.push(
            p.parse::<u64>()
                .map_err(|_| format!("timestamp {raw:?} out of range"))?,
        );
    }
    // every field after the leading one is base 60
    if nums[1..].iter().any(|n| *n >= 60) {
        return Err(format!("timestamp {raw:?} has a field >= 60"));
    }
    let seconds = nums.iter().fold(0u64, |acc, n| acc * 60 + n);
    let millis = match frac {
        None => 0,
        Some(f) if !f.is_empty() && f.len() <= 3 && f.bytes().all(|b| b.is_ascii_digit()) => {
            let padded = format!("{f:0<3}");
            padded.parse::<u64>().unwrap()
        }
        Some(_) => return Err(format!("unrecognised fraction in {raw:?}")),
    };
    Ok(seconds * 1000 + millis)
}

/// `HH:MM:SS`, with `.mmm` appended only when the value has a millisecond part.
pub fn format_timestamp(ms: u64) -> String {
    let secs = ms / 1000;
    let base = format!("{:02}:{:02}:{:02}", secs / 3600, (secs / 60) % 60, secs % 60);
    match ms % 1000 {
        0 => base,
        frac => format!("{base}.{frac:03}"),
    }
}
