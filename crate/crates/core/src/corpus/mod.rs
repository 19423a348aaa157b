//! Annotated privacy-policy corpus: the 12-class taxonomy, OPP-115 ingest,
//! policy-level splits, statistics and the canonical JSONL form.

mod canonical;
mod label;
mod mapping;
mod opp115;
mod split;
mod stats;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::text;

pub use canonical::{export_canonical, load_canonical, write_canonical, CanonicalRecord};
pub use label::{Label12, UnknownLabel};
pub use mapping::{MappingRule, TierMapping, OPP115_PRACTICES};
pub use opp115::{import_opp115, ImportOptions, ImportReport, Imported, UnmappedPair};
pub use split::{split_by_policy, split_from_lists, Side, Split};
pub use stats::{corpus_stats, LabelHistogram, SideStats, StatsTable};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("malformed source {}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    MalformedSource {
        path: PathBuf,
        line: Option<u64>,
        message: String,
    },
    #[error("{} unmappable (practice, attribute) pair(s): {}", pairs.len(), pairs.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("; "))]
    UnmappableLabel { pairs: Vec<UnmappedPair> },
    #[error("split counts {train} + {test} do not match {policies} policies")]
    BadCounts { train: usize, test: usize, policies: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("paragraph {paragraph_id}: span [{start}, {end}) invalid for text of {len} chars")]
    InvalidSpan {
        paragraph_id: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("invalid tier mapping: {0}")]
    Mapping(String),
    #[error("I/O failure on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: Option<u64>, message: impl Into<String>) -> Self {
        CorpusError::MalformedSource {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

/// A gold (label, reason span) pair. Offsets are character offsets into the
/// owning paragraph's text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub label: Label12,
    pub span_start: usize,
    pub span_end: usize,
    pub reason_text: String,
}

impl Annotation {
    /// Builds an annotation, checking the span against `text`.
    pub fn new(
        paragraph_id: &str,
        text: &str,
        label: Label12,
        span_start: usize,
        span_end: usize,
    ) -> Result<Self, CorpusError> {
        let bad = || CorpusError::InvalidSpan {
            paragraph_id: paragraph_id.to_string(),
            start: span_start,
            end: span_end,
            len: text::char_len(text),
        };
        if span_start >= span_end {
            return Err(bad());
        }
        let reason_text = text::char_slice(text, span_start, span_end).ok_or_else(bad)?;
        Ok(Annotation {
            label,
            span_start,
            span_end,
            reason_text: reason_text.to_string(),
        })
    }
}

/// One policy text unit with its gold annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub policy_id: String,
    pub paragraph_id: String,
    pub text: String,
    pub annotations: Vec<Annotation>,
}

impl Paragraph {
    /// Builds a paragraph from `(label, start, end)` spans, validating each
    /// span and dropping exact `(label, span)` duplicates.
    pub fn new(
        policy_id: impl Into<String>,
        paragraph_id: impl Into<String>,
        text: impl Into<String>,
        spans: impl IntoIterator<Item = (Label12, usize, usize)>,
    ) -> Result<Self, CorpusError> {
        let paragraph_id = paragraph_id.into();
        let text = text.into();
        let annotations = spans
            .into_iter()
            .map(|(label, s, e)| Annotation::new(&paragraph_id, &text, label, s, e))
            .collect::<Result<Vec<_>, _>>()?;
        let mut p = Paragraph {
            policy_id: policy_id.into(),
            paragraph_id,
            text,
            annotations,
        };
        p.normalize_annotations();
        Ok(p)
    }

    /// Sorts annotations by (start, end, label) and removes exact duplicates.
    /// Returns the number removed.
    pub fn normalize_annotations(&mut self) -> usize {
        let before = self.annotations.len();
        self.annotations.sort_by_key(|a| (a.span_start, a.span_end, a.label));
        self.annotations.dedup_by_key(|a| (a.span_start, a.span_end, a.label));
        before - self.annotations.len()
    }

    /// Distinct gold labels.
    pub fn gold_labels(&self) -> BTreeSet<Label12> {
        self.annotations.iter().map(|a| a.label).collect()
    }

    pub fn char_len(&self) -> usize {
        text::char_len(&self.text)
    }

    /// Re-checks every annotation span and reason against the text.
    pub fn validate(&self) -> Result<(), CorpusError> {
        for a in &self.annotations {
            let fresh = Annotation::new(&self.paragraph_id, &self.text, a.label, a.span_start, a.span_end)?;
            if fresh.reason_text != a.reason_text {
                return Err(CorpusError::InvalidSpan {
                    paragraph_id: self.paragraph_id.clone(),
                    start: a.span_start,
                    end: a.span_end,
                    len: self.char_len(),
                });
            }
        }
        Ok(())
    }
}
