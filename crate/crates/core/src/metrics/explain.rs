use serde::{Deserialize, Serialize};

use super::distance::{norm_levenshtein, word_overlap};
use crate::corpus::{Annotation, Label12, Paragraph};
use crate::text;

/// Row titles of the overlap table, top bin first.
pub const BIN_ROWS: [&str; 3] = ["50 - 100", "10 - 50", "less than 10"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainabilityRecord {
    pub paragraph_id: String,
    pub gold_len: usize,
    pub reason_len: usize,
    pub norm_levenshtein: f64,
    pub overlap: f64,
}

impl ExplainabilityRecord {
    pub fn new(paragraph_id: &str, gold: &str, reason: &str) -> Self {
        ExplainabilityRecord {
            paragraph_id: paragraph_id.to_string(),
            gold_len: text::char_len(gold),
            reason_len: text::char_len(reason),
            norm_levenshtein: norm_levenshtein(gold, reason),
            overlap: word_overlap(gold, reason),
        }
    }
}

/// Bin index for an overlap value: 0 for [0.5, 1], 1 for [0.1, 0.5),
/// 2 for [0, 0.1).
pub fn bin_of(overlap: f64) -> usize {
    if overlap >= 0.5 {
        0
    } else if overlap >= 0.1 {
        1
    } else {
        2
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OverlapBins {
    pub counts: [usize; 3],
}

impl OverlapBins {
    pub fn from_overlaps(overlaps: impl IntoIterator<Item = f64>) -> Self {
        let mut counts = [0; 3];
        for o in overlaps {
            counts[bin_of(o)] += 1;
        }
        OverlapBins { counts }
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a ExplainabilityRecord>) -> Self {
        Self::from_overlaps(records.into_iter().map(|r| r.overlap))
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Share of records per bin in percent (all zero when empty).
    pub fn percentages(&self) -> [f64; 3] {
        let total = self.total();
        if total == 0 {
            return [0.0; 3];
        }
        self.counts.map(|c| c as f64 * 100.0 / total as f64)
    }

    /// Percentages as printed, one decimal.
    pub fn rendered(&self) -> [String; 3] {
        self.percentages().map(|p| format!("{p:.1}"))
    }
}

/// Overlap table with one column per method.
pub fn render_overlap_table(columns: &[(&str, OverlapBins)]) -> String {
    let first = "Overlap Percentage";
    let w0 = BIN_ROWS.iter().map(|r| r.len()).chain([first.len()]).max().unwrap_or(0);
    let widths: Vec<usize> = columns.iter().map(|(name, _)| name.chars().count().max(5)).collect();
    let mut out = format!("{first:<w0$}");
    for ((name, _), w) in columns.iter().zip(&widths) {
        out.push_str(&format!("  {name:>w$}"));
    }
    out.push('\n');
    let cells: Vec<[String; 3]> = columns.iter().map(|(_, b)| b.rendered()).collect();
    for (row, title) in BIN_ROWS.iter().enumerate() {
        out.push_str(&format!("{title:<w0$}"));
        for (c, w) in cells.iter().zip(&widths) {
            out.push_str(&format!("  {:>w$}", c[row]));
        }
        out.push('\n');
    }
    out
}

/// A predicted reason matched to the gold annotation it is scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct ReasonPair<'a> {
    pub gold: &'a Annotation,
    pub predicted: String,
    pub overlap: f64,
}

/// Pairs each predicted `(label, reason)` with the same-label gold
/// annotation of highest word overlap (first one on ties). Predictions
/// whose label has no gold annotation are left out.
pub fn pair_reasons<'a, 'b>(
    paragraph: &'a Paragraph,
    predictions: impl IntoIterator<Item = (Label12, &'b str)>,
) -> Vec<ReasonPair<'a>> {
    let mut out = Vec::new();
    for (label, reason) in predictions {
        let mut best: Option<(&Annotation, f64)> = None;
        for a in paragraph.annotations.iter().filter(|a| a.label == label) {
            let o = word_overlap(&a.reason_text, reason);
            if best.is_none_or(|(_, b)| o > b) {
                best = Some((a, o));
            }
        }
        if let Some((gold, overlap)) = best {
            out.push(ReasonPair {
                gold,
                predicted: reason.to_string(),
                overlap,
            });
        }
    }
    out
}

/// Scatter data as CSV with a header row; floats carry six decimals.
pub fn scatter_csv(records: &[ExplainabilityRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["paragraph_id", "gold_len", "reason_len", "norm_levenshtein", "overlap"])
        .expect("in-memory write");
    for r in records {
        w.write_record([
            r.paragraph_id.clone(),
            r.gold_len.to_string(),
            r.reason_len.to_string(),
            format!("{:.6}", r.norm_levenshtein),
            format!("{:.6}", r.overlap),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}
