use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use super::run::ParagraphOutcome;
use super::verifier::{Verifier, VerifierInput};
use super::PipelineError;
use crate::corpus::{Label12, Paragraph};
use crate::metrics::{aggregate_label12, match_predictions, Prf};

/// Configuration names, in increasing number of stages.
pub const ABLATION_CONFIGS: [&str; 3] = [
    "explained classifier only",
    "+ verifier without refill",
    "+ blank filler + verifier",
];

/// Threshold for the no-refill configuration, where the verifier compares
/// the reason with the label's keyword gloss instead of a refill. For
/// sentence-length reasons this amounts to sharing one keyword.
pub const DEFAULT_GLOSS_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub config: &'static str,
    #[serde(rename = "macro")]
    pub macro_: Prf,
    pub micro: Prf,
    /// Predicted (paragraph, label) decisions.
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub threshold: f64,
    pub gloss_threshold: f64,
}

impl AblationReport {
    pub fn render(&self) -> String {
        let w = ABLATION_CONFIGS.iter().map(|c| c.len()).max().unwrap_or(0);
        let mut out = format!(
            "{:<w$}  {:>9}  {:>6}  {:>4}\n",
            "Configuration (macro)", "Precision", "Recall", "F1"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<w$}  {:>9.2}  {:>6.2}  {:>4.2}",
                r.config, r.macro_.precision, r.macro_.recall, r.macro_.f1
            );
        }
        out
    }
}

/// Scores the three stage configurations on the same generations.
/// Paragraphs without an outcome count as predicting nothing.
pub fn ablation(
    paragraphs: &[&Paragraph],
    outcomes: &[ParagraphOutcome],
    verifier: &dyn Verifier,
    gloss_threshold: f64,
) -> Result<AblationReport, PipelineError> {
    let by_id: BTreeMap<&str, &ParagraphOutcome> = outcomes.iter().map(|o| (o.paragraph_id.as_str(), o)).collect();
    let mut per_config: [Vec<_>; 3] = Default::default();
    let mut predicted = [0usize; 3];
    let mut threshold = super::DEFAULT_THRESHOLD;
    for p in paragraphs {
        let sets: [BTreeSet<Label12>; 3] = match by_id.get(p.paragraph_id.as_str()) {
            None => Default::default(),
            Some(o) => {
                threshold = o.threshold;
                let stage1: BTreeSet<Label12> = o.kept.iter().map(|k| k.label).collect();
                let mut gloss = BTreeSet::new();
                for k in &o.kept {
                    let input = VerifierInput::new(k.label, &k.excerpt, k.label.gloss())?;
                    if verifier.score(&input)? >= gloss_threshold {
                        gloss.insert(k.label);
                    }
                }
                [stage1, gloss, o.predicted_labels()]
            }
        };
        for (i, set) in sets.iter().enumerate() {
            predicted[i] += set.len();
            per_config[i].push(match_predictions(p, set));
        }
    }
    let rows = (0..3)
        .map(|i| {
            let board = aggregate_label12(&per_config[i]);
            AblationRow {
                config: ABLATION_CONFIGS[i],
                macro_: board.averages.macro_,
                micro: board.averages.micro,
                predicted: predicted[i],
            }
        })
        .collect();
    Ok(AblationReport {
        rows,
        threshold,
        gloss_threshold,
    })
}
