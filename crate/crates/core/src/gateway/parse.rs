//! Lossy parsers for model generations.

use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use super::GatewayError;
use crate::corpus::Label12;

static LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"(?i)^\s*(?:[-*]|\d+[.)])?\s*label\s*:\s*(?P<label>[^|]+?)\s*\|\s*reason\s*:\s*"(?P<reason>(?:[^"\\]|\\.)*)"\s*$"#,
    )
    .expect("valid regex")
});

/// Pairs extracted from one classifier generation plus what was dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParsedClassifier {
    pub pairs: Vec<(Label12, String)>,
    /// Non-blank lines that do not follow the line format (or carry an
    /// empty reason).
    pub malformed: usize,
    /// Well-formed lines naming a class outside the taxonomy.
    pub unknown_label: usize,
}

impl ParsedClassifier {
    pub fn dropped(&self) -> usize {
        self.malformed + self.unknown_label
    }
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('t') => out.push('\t'),
            Some(other @ ('"' | '\\')) => out.push(other),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Extracts every well-formed `Label: <class> | Reason: "<text>"` line, in
/// order. Blank lines are ignored; anything else is counted as dropped.
pub fn parse_classifier_output(raw: &str) -> ParsedClassifier {
    let mut out = ParsedClassifier::default();
    for line in raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let Some(caps) = LINE.captures(line) else {
            out.malformed += 1;
            continue;
        };
        let Some(label) = Label12::parse_lenient(&caps["label"]) else {
            out.unknown_label += 1;
            continue;
        };
        let reason = unescape(&caps["reason"]);
        if reason.trim().is_empty() {
            out.malformed += 1;
            continue;
        }
        out.pairs.push((label, reason));
    }
    out
}

fn strip_quotes(s: &str) -> &str {
    for (open, close) in [('"', '"'), ('\'', '\''), ('\u{201c}', '\u{201d}')] {
        if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
            return inner;
        }
    }
    s
}

/// First non-empty line of a blank-filler generation with surrounding
/// quotes and whitespace removed.
pub fn parse_filler_output(raw: &str) -> Result<String, GatewayError> {
    let line = raw
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or(GatewayError::EmptyGeneration)?;
    let text = strip_quotes(line).trim();
    if text.is_empty() {
        return Err(GatewayError::EmptyGeneration);
    }
    Ok(text.to_string())
}
