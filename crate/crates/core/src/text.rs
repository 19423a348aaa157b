//! Character-offset helpers shared by the corpus, pipeline and metrics code.
//!
//! Every offset in this crate counts Unicode scalar values, never bytes.

use std::collections::BTreeSet;

/// Number of Unicode scalar values in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte offset of the `char_idx`-th scalar value (or `s.len()` at the end).
pub fn byte_offset(s: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    match s.char_indices().nth(char_idx) {
        Some((b, _)) => Some(b),
        None if char_len(s) == char_idx => Some(s.len()),
        None => None,
    }
}

/// Substring `[start, end)` in character offsets.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let b0 = byte_offset(s, start)?;
    let b1 = byte_offset(s, end)?;
    Some(&s[b0..b1])
}

/// Lowercased text with whitespace runs collapsed to one space, plus a map
/// from each normalized character back to its source character index.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub text: String,
    pub origin: Vec<usize>,
}

pub fn normalize(s: &str) -> Normalized {
    let mut text = String::with_capacity(s.len());
    let mut origin = Vec::with_capacity(s.len());
    let mut in_space = false;
    for (i, c) in s.chars().enumerate() {
        if c.is_whitespace() {
            if !in_space {
                text.push(' ');
                origin.push(i);
                in_space = true;
            }
        } else {
            in_space = false;
            for lc in c.to_lowercase() {
                text.push(lc);
                origin.push(i);
            }
        }
    }
    Normalized { text, origin }
}

/// Normalized form of a short query: trimmed, then [`normalize`]d.
pub fn normalize_query(s: &str) -> String {
    normalize(s.trim()).text
}

/// Locates the first occurrence of `needle` in `haystack` under
/// normalization and returns its span in `haystack`'s character offsets.
pub fn find_normalized(haystack: &str, needle: &str) -> Option<(usize, usize)> {
    let query = normalize_query(needle);
    if query.is_empty() {
        return None;
    }
    let norm = normalize(haystack);
    let byte_pos = norm.text.find(&query)?;
    let start_n = norm.text[..byte_pos].chars().count();
    let end_n = start_n + query.chars().count();
    let start = norm.origin[start_n];
    let end = norm.origin[end_n - 1] + 1;
    Some((start, end))
}

/// Word tokens: lowercase, split on runs of non-alphanumeric characters.
pub fn words(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

pub fn word_set(s: &str) -> BTreeSet<String> {
    words(s).into_iter().collect()
}
