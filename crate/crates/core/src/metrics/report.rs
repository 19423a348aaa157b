use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::classification::{aggregate_label12, match_predictions, Prf, Scoreboard};
use super::explain::{pair_reasons, render_overlap_table, ExplainabilityRecord, OverlapBins, BIN_ROWS};
use super::MetricsError;
use crate::corpus::{Label12, Paragraph};
use crate::pipeline::PredictionRecord;

/// Which predictions feed the explainability scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainScope {
    #[default]
    Accepted,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub label: Label12,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassRow>,
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_: Prf,
    pub weighted: Prf,
    pub support: usize,
}

impl From<&Scoreboard<Label12>> for ClassificationReport {
    fn from(b: &Scoreboard<Label12>) -> Self {
        ClassificationReport {
            classes: b
                .classes
                .iter()
                .map(|c| ClassRow {
                    label: c.label,
                    precision: c.scores.precision,
                    recall: c.scores.recall,
                    f1: c.scores.f1,
                    support: c.support,
                    tp: c.counts.tp,
                    fp: c.counts.fp,
                    fn_: c.counts.fn_,
                })
                .collect(),
            micro: b.averages.micro,
            macro_: b.averages.macro_,
            weighted: b.averages.weighted,
            support: b.total_support,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub range: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainabilityReport {
    pub scope: ExplainScope,
    pub records: usize,
    pub mean_norm_levenshtein: f64,
    pub mean_overlap: f64,
    pub bins: Vec<BinRow>,
}

impl ExplainabilityReport {
    pub fn from_records(scope: ExplainScope, records: &[ExplainabilityRecord]) -> Self {
        let n = records.len();
        let mean = |f: fn(&ExplainabilityRecord) -> f64| {
            if n == 0 {
                0.0
            } else {
                records.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let bins = OverlapBins::from_records(records);
        let pct = bins.percentages();
        ExplainabilityReport {
            scope,
            records: n,
            mean_norm_levenshtein: mean(|r| r.norm_levenshtein),
            mean_overlap: mean(|r| r.overlap),
            bins: (0..3)
                .map(|i| BinRow {
                    range: BIN_ROWS[i].to_string(),
                    count: bins.counts[i],
                    percent: pct[i],
                })
                .collect(),
        }
    }

    pub fn overlap_bins(&self) -> OverlapBins {
        OverlapBins {
            counts: [self.bins[0].count, self.bins[1].count, self.bins[2].count],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: Option<u64>,
    pub paragraphs: usize,
    pub predictions: usize,
    pub classification: ClassificationReport,
    pub explainability: ExplainabilityReport,
}

/// Full evaluation output: the report plus the per-reason records behind
/// its explainability half (the scatter data).
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub records: Vec<ExplainabilityRecord>,
}

/// Scores `predictions` against `paragraphs`. The predicted label set of a
/// paragraph is the set of its accepted labels; paragraphs without any
/// prediction line count as empty predictions.
pub fn evaluate(
    paragraphs: &[&Paragraph],
    predictions: &[PredictionRecord],
    scope: ExplainScope,
) -> Result<Evaluation, MetricsError> {
    let mut by_id: BTreeMap<&str, (&Paragraph, Vec<&PredictionRecord>)> = BTreeMap::new();
    for p in paragraphs {
        by_id.insert(&p.paragraph_id, (p, Vec::new()));
    }
    for pred in predictions {
        match by_id.get_mut(pred.paragraph_id.as_str()) {
            Some((_, preds)) => preds.push(pred),
            None => return Err(MetricsError::UnknownParagraph(pred.paragraph_id.clone())),
        }
    }

    let mut counts = Vec::with_capacity(by_id.len());
    let mut records = Vec::new();
    for (id, (paragraph, preds)) in &by_id {
        let predicted: BTreeSet<Label12> = preds.iter().filter(|r| r.accepted).map(|r| r.label).collect();
        counts.push(match_predictions(paragraph, &predicted));
        let explained = preds
            .iter()
            .filter(|r| scope == ExplainScope::All || r.accepted)
            .map(|r| (r.label, r.reason.as_str()));
        for pair in pair_reasons(paragraph, explained) {
            records.push(ExplainabilityRecord::new(id, &pair.gold.reason_text, &pair.predicted));
        }
    }
    let board = aggregate_label12(&counts);
    Ok(Evaluation {
        report: EvalReport {
            seed: None,
            paragraphs: by_id.len(),
            predictions: predictions.len(),
            classification: ClassificationReport::from(&board),
            explainability: ExplainabilityReport::from_records(scope, &records),
        },
        records,
    })
}

impl ClassificationReport {
    /// Per-class table with the three averages, two decimals.
    pub fn render(&self) -> String {
        let w0 = Label12::ALL.iter().map(|l| l.name().len()).max().unwrap_or(0).max(16);
        let mut out = format!(
            "{:<w0$}  {:>9}  {:>6}  {:>4}  {:>7}\n",
            "Class", "Precision", "Recall", "F1", "Support"
        );
        let row = |out: &mut String, name: &str, s: Prf, support: usize| {
            let _ = writeln!(
                out,
                "{name:<w0$}  {:>9.2}  {:>6.2}  {:>4.2}  {support:>7}",
                s.precision, s.recall, s.f1
            );
        };
        for c in &self.classes {
            let s = Prf {
                precision: c.precision,
                recall: c.recall,
                f1: c.f1,
            };
            row(&mut out, c.label.name(), s, c.support);
        }
        row(&mut out, "Micro Average", self.micro, self.support);
        row(&mut out, "Macro Average", self.macro_, self.support);
        row(&mut out, "Weighted Average", self.weighted, self.support);
        out
    }
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed: {seed}");
        }
        let _ = writeln!(
            out,
            "paragraphs: {}  prediction lines: {}\n",
            self.paragraphs, self.predictions
        );
        out.push_str(&self.classification.render());
        let e = &self.explainability;
        let scope = match e.scope {
            ExplainScope::Accepted => "accepted predictions",
            ExplainScope::All => "all predictions",
        };
        let _ = writeln!(out, "\nExplainability ({scope}, {} paired reasons)", e.records);
        let _ = writeln!(out, "mean normalized Levenshtein  {:.4}", e.mean_norm_levenshtein);
        let _ = writeln!(out, "mean word overlap            {:.4}\n", e.mean_overlap);
        out.push_str(&render_overlap_table(&[("Share", e.overlap_bins())]));
        out
    }
}
