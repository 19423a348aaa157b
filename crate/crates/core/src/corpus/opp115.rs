//! Reader for the released OPP-115 layout:
//!
//! ```text
//! <raw>/annotations/<policy>_<domain>.csv        one row per expert annotation
//! <raw>/sanitized_policies/<policy>_<domain>.html segments separated by `|||`
//! ```
//!
//! Annotation rows carry no header: `annotation_id, batch_id, annotator_id,
//! policy_id, segment_id, category, attributes_json, date, url`. The JSON maps
//! attribute names to `{startIndexInSegment, endIndexInSegment, selectedText,
//! value}`; unselected attributes use index `-1`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::Value;

use super::{Annotation, CorpusError, Paragraph, TierMapping};
use crate::text;

#[derive(Debug, Clone)]
pub struct ImportOptions {
    pub annotations_dir: String,
    pub policies_dir: String,
    /// Report unmappable pairs instead of failing.
    pub skip_unmappable: bool,
    /// Keep segments that end up with no mapped annotation.
    pub include_unannotated: bool,
}

impl Default for ImportOptions {
    fn default() -> Self {
        ImportOptions {
            annotations_dir: "annotations".into(),
            policies_dir: "sanitized_policies".into(),
            skip_unmappable: false,
            include_unannotated: false,
        }
    }
}

/// A (practice, attribute) pair the mapping could not resolve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnmappedPair {
    pub practice: String,
    pub attribute: Option<String>,
    pub occurrences: usize,
    /// First `file:line` where the pair was seen.
    pub first_seen: String,
}

impl fmt::Display for UnmappedPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}) x{} first at {}",
            self.practice,
            self.attribute.as_deref().unwrap_or("-"),
            self.occurrences,
            self.first_seen
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImportReport {
    pub policy_files: usize,
    pub rows: usize,
    pub annotations: usize,
    pub duplicates_removed: usize,
    /// Attribute spans whose offsets disagreed with the text but whose
    /// selected text was found elsewhere in the segment.
    pub relocated_spans: usize,
    /// Attribute spans that could not be aligned at all.
    pub unaligned_spans: usize,
    /// Annotations with no alignable attribute span; they cover the segment.
    pub whole_segment_fallbacks: usize,
    pub unannotated_segments: usize,
    pub unmappable: Vec<UnmappedPair>,
}

#[derive(Debug, Clone)]
pub struct Imported {
    pub paragraphs: Vec<Paragraph>,
    pub report: ImportReport,
}

/// Ingests an OPP-115 directory into paragraphs ordered by
/// (policy_id, document order).
pub fn import_opp115(raw_dir: &Path, mapping: &TierMapping, options: &ImportOptions) -> Result<Imported, CorpusError> {
    if !raw_dir.is_dir() {
        return Err(CorpusError::malformed(raw_dir, None, "not a directory"));
    }
    let ann_dir = raw_dir.join(&options.annotations_dir);
    let pol_dir = raw_dir.join(&options.policies_dir);
    let mut csvs = list_files(&ann_dir, "csv")?;
    csvs.sort();
    if csvs.is_empty() {
        return Err(CorpusError::malformed(&ann_dir, None, "no annotation files found"));
    }

    let per_policy = csvs
        .par_iter()
        .map(|csv_path| {
            let stem = csv_path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| CorpusError::malformed(csv_path, None, "bad file name"))?;
            let html_path = pol_dir.join(format!("{stem}.html"));
            import_policy(csv_path, &html_path, stem, mapping, options)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut paragraphs = Vec::new();
    let mut report = ImportReport {
        policy_files: csvs.len(),
        ..Default::default()
    };
    let mut unmapped: BTreeMap<(String, Option<String>), UnmappedPair> = BTreeMap::new();
    for policy in per_policy {
        report.rows += policy.report.rows;
        report.annotations += policy.report.annotations;
        report.duplicates_removed += policy.report.duplicates_removed;
        report.relocated_spans += policy.report.relocated_spans;
        report.unaligned_spans += policy.report.unaligned_spans;
        report.whole_segment_fallbacks += policy.report.whole_segment_fallbacks;
        report.unannotated_segments += policy.report.unannotated_segments;
        for u in policy.report.unmappable {
            unmapped
                .entry((u.practice.clone(), u.attribute.clone()))
                .and_modify(|e| e.occurrences += u.occurrences)
                .or_insert(u);
        }
        paragraphs.extend(policy.paragraphs);
    }
    report.unmappable = unmapped.into_values().collect();
    if !report.unmappable.is_empty() && !options.skip_unmappable {
        return Err(CorpusError::UnmappableLabel {
            pairs: report.unmappable,
        });
    }
    paragraphs.sort_by(|a, b| {
        (a.policy_id.as_str(), a.paragraph_id.as_str()).cmp(&(b.policy_id.as_str(), b.paragraph_id.as_str()))
    });
    Ok(Imported { paragraphs, report })
}

fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, CorpusError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CorpusError::malformed(dir, None, format!("cannot read directory: {e}")))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CorpusError::io(dir, e))?.path();
        if path.is_file() && path.extension().and_then(|e| e.to_str()) == Some(ext) {
            out.push(path);
        }
    }
    Ok(out)
}

fn policy_id_of(stem: &str) -> &str {
    stem.split('_').next().unwrap_or(stem)
}

struct Segment {
    text: String,
    /// Raw char index -> cleaned char index; one extra entry for the end.
    raw_to_clean: Vec<usize>,
}

fn import_policy(
    csv_path: &Path,
    html_path: &Path,
    stem: &str,
    mapping: &TierMapping,
    options: &ImportOptions,
) -> Result<Imported, CorpusError> {
    let html = std::fs::read_to_string(html_path)
        .map_err(|e| CorpusError::malformed(html_path, None, format!("cannot read policy text: {e}")))?;
    let segments: Vec<Segment> = html
        .split("|||")
        .map(|raw| {
            let (text, raw_to_clean) = clean_html(raw);
            Segment { text, raw_to_clean }
        })
        .collect();
    let policy_id = policy_id_of(stem).to_string();

    let mut report = ImportReport::default();
    let mut spans: BTreeMap<usize, Vec<Annotation>> = BTreeMap::new();
    let mut unmapped: HashMap<(String, Option<String>), UnmappedPair> = HashMap::new();

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(csv_path)
        .map_err(|e| CorpusError::malformed(csv_path, None, e.to_string()))?;
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| CorpusError::malformed(csv_path, e.position().map(|p| p.line()), e.to_string()))?;
        let line = row.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        let bad = |msg: String| CorpusError::malformed(csv_path, Some(line), msg);
        if row.len() < 7 {
            return Err(bad(format!("expected at least 7 fields, found {}", row.len())));
        }
        let segment_id: usize = match row[4].trim().parse() {
            Ok(id) => id,
            // tolerate a header line
            Err(_) if i == 0 => continue,
            Err(_) => return Err(bad(format!("segment_id `{}` is not an integer", &row[4]))),
        };
        report.rows += 1;
        let practice = row[5].trim().to_string();
        let attrs = parse_attributes(&row[6]).map_err(bad)?;
        let segment = segments.get(segment_id).ok_or_else(|| {
            bad(format!(
                "segment {segment_id} out of range ({} segments)",
                segments.len()
            ))
        })?;

        let names_and_values: Vec<&str> = attrs
            .iter()
            .flat_map(|a| std::iter::once(a.name.as_str()).chain(a.value.as_deref()))
            .collect();
        let Some(label) = mapping.resolve(&practice, names_and_values.iter().copied()) else {
            let attribute = attrs.iter().find_map(|a| a.value.clone());
            unmapped
                .entry((practice.clone(), attribute.clone()))
                .and_modify(|u| u.occurrences += 1)
                .or_insert_with(|| UnmappedPair {
                    practice: practice.clone(),
                    attribute,
                    occurrences: 1,
                    first_seen: format!("{}:{line}", csv_path.display()),
                });
            continue;
        };

        let seg_len = text::char_len(&segment.text);
        let mut lo = usize::MAX;
        let mut hi = 0;
        for attr in &attrs {
            match align_attribute(segment, attr) {
                Alignment::Exact(s, e) => {
                    lo = lo.min(s);
                    hi = hi.max(e);
                }
                Alignment::Relocated(s, e) => {
                    report.relocated_spans += 1;
                    lo = lo.min(s);
                    hi = hi.max(e);
                }
                Alignment::Unaligned => report.unaligned_spans += 1,
                Alignment::NotSelected => {}
            }
        }
        if lo >= hi {
            report.whole_segment_fallbacks += 1;
            lo = 0;
            hi = seg_len;
        }
        let Some((s, e)) = trim_span(&segment.text, lo, hi) else {
            // segment is blank; nothing to annotate
            report.unaligned_spans += 1;
            continue;
        };
        let pid = paragraph_id(&policy_id, segment_id);
        let ann = Annotation::new(&pid, &segment.text, label, s, e)?;
        spans.entry(segment_id).or_default().push(ann);
    }

    let mut paragraphs = Vec::new();
    for (segment_id, segment) in segments.iter().enumerate() {
        let anns = spans.remove(&segment_id).unwrap_or_default();
        if anns.is_empty() {
            if segment.text.trim().is_empty() {
                continue;
            }
            report.unannotated_segments += 1;
            if !options.include_unannotated {
                continue;
            }
        }
        let mut p = Paragraph {
            policy_id: policy_id.clone(),
            paragraph_id: paragraph_id(&policy_id, segment_id),
            text: segment.text.clone(),
            annotations: anns,
        };
        report.duplicates_removed += p.normalize_annotations();
        report.annotations += p.annotations.len();
        paragraphs.push(p);
    }
    report.unmappable = unmapped.into_values().collect();
    report.unmappable.sort_by(|a, b| a.first_seen.cmp(&b.first_seen));
    Ok(Imported { paragraphs, report })
}

pub(crate) fn paragraph_id(policy_id: &str, segment_id: usize) -> String {
    format!("{policy_id}_{segment_id:04}")
}

struct Attribute {
    name: String,
    value: Option<String>,
    start: i64,
    end: i64,
    selected: Option<String>,
}

fn parse_attributes(raw: &str) -> Result<Vec<Attribute>, String> {
    let value: Value = serde_json::from_str(raw).map_err(|e| format!("attribute JSON: {e}"))?;
    let obj = value
        .as_object()
        .ok_or_else(|| "attribute JSON is not an object".to_string())?;
    let mut out = Vec::with_capacity(obj.len());
    for (name, v) in obj {
        let int = |k: &str| v.get(k).and_then(Value::as_i64).unwrap_or(-1);
        let string = |k: &str| {
            v.get(k)
                .and_then(Value::as_str)
                .filter(|s| !s.is_empty() && *s != "null")
                .map(str::to_string)
        };
        out.push(Attribute {
            name: name.clone(),
            value: string("value"),
            start: int("startIndexInSegment"),
            end: int("endIndexInSegment"),
            selected: string("selectedText"),
        });
    }
    Ok(out)
}

enum Alignment {
    Exact(usize, usize),
    Relocated(usize, usize),
    Unaligned,
    NotSelected,
}

fn align_attribute(segment: &Segment, attr: &Attribute) -> Alignment {
    if attr.start < 0 || attr.end <= attr.start {
        return Alignment::NotSelected;
    }
    let (s, e) = (attr.start as usize, attr.end as usize);
    let Some(selected) = attr.selected.as_deref() else {
        // offsets without text to check against: trust them if they fit
        return match mapped(segment, s, e) {
            Some((cs, ce)) if cs < ce => Alignment::Exact(cs, ce),
            _ => Alignment::Unaligned,
        };
    };
    let (want, _) = clean_html(selected);
    let want = text::normalize_query(&want);
    let matches = |cs: usize, ce: usize| {
        text::char_slice(&segment.text, cs, ce)
            .map(|got| text::normalize_query(got) == want)
            .unwrap_or(false)
    };
    // offsets may count raw HTML characters or rendered ones
    let candidates = [mapped(segment, s, e), Some((s, e))];
    for (cs, ce) in candidates.into_iter().flatten() {
        if cs < ce && matches(cs, ce) {
            return Alignment::Exact(cs, ce);
        }
    }
    match text::find_normalized(&segment.text, &want) {
        Some((cs, ce)) => Alignment::Relocated(cs, ce),
        None => Alignment::Unaligned,
    }
}

fn mapped(segment: &Segment, s: usize, e: usize) -> Option<(usize, usize)> {
    Some((*segment.raw_to_clean.get(s)?, *segment.raw_to_clean.get(e)?))
}

fn trim_span(text: &str, s: usize, e: usize) -> Option<(usize, usize)> {
    let chars: Vec<char> = text.chars().skip(s).take(e - s).collect();
    let lead = chars.iter().take_while(|c| c.is_whitespace()).count();
    if lead == chars.len() {
        return None;
    }
    let trail = chars.iter().rev().take_while(|c| c.is_whitespace()).count();
    Some((s + lead, e - trail))
}

/// Strips HTML tags and decodes entities. Returns the cleaned text and a map
/// from every raw character index (plus the end position) to the cleaned
/// character index it lands on.
pub(crate) fn clean_html(raw: &str) -> (String, Vec<usize>) {
    let chars: Vec<char> = raw.chars().collect();
    let mut out = String::with_capacity(raw.len());
    let mut out_len = 0usize;
    let mut map = Vec::with_capacity(chars.len() + 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '<' {
            if let Some(close) = tag_end(&chars, i) {
                map.extend(std::iter::repeat_n(out_len, close + 1 - i));
                i = close + 1;
                continue;
            }
        }
        if c == '&' {
            if let Some((decoded, consumed)) = decode_entity(&chars[i..]) {
                map.extend(std::iter::repeat_n(out_len, consumed));
                out.push(decoded);
                out_len += 1;
                i += consumed;
                continue;
            }
        }
        map.push(out_len);
        out.push(c);
        out_len += 1;
        i += 1;
    }
    map.push(out_len);
    (out, map)
}

fn tag_end(chars: &[char], start: usize) -> Option<usize> {
    let next = *chars.get(start + 1)?;
    if !(next.is_ascii_alphabetic() || next == '/' || next == '!') {
        return None;
    }
    chars[start..].iter().position(|&c| c == '>').map(|p| start + p)
}

fn decode_entity(chars: &[char]) -> Option<(char, usize)> {
    let semi = chars.iter().take(10).position(|&c| c == ';')?;
    let body: String = chars[1..semi].iter().collect();
    let decoded = match body.as_str() {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        _ => {
            let num = body.strip_prefix('#')?;
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse().ok()?,
            };
            char::from_u32(code)?
        }
    };
    Some((decoded, semi + 1))
}
