//! Scoring of predictions against gold annotations.
//!
//! Classification is scored per (paragraph, label) decision with micro,
//! macro and support-weighted averages. Explainability compares predicted
//! reasons with the gold excerpts they pair to, by normalized edit distance
//! and word-set overlap.

mod classification;
mod distance;
mod explain;
mod random;
mod report;

pub use classification::{
    aggregate, aggregate_label12, f1, match_label_sets, match_predictions, ratio, AverageScores, ClassScore, Counts,
    Prf, Scoreboard,
};
pub use distance::{levenshtein, norm_levenshtein, word_overlap};
pub use explain::{
    bin_of, pair_reasons, render_overlap_table, scatter_csv, ExplainabilityRecord, OverlapBins, ReasonPair, BIN_ROWS,
};
pub use random::{draw_rng, random_reason_baseline, random_reason_span, LengthRatios};
pub use report::{
    evaluate, BinRow, ClassRow, ClassificationReport, EvalReport, Evaluation, ExplainScope, ExplainabilityReport,
};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("prediction references unknown paragraph {0}")]
    UnknownParagraph(String),
    #[error("length-ratio distribution is empty")]
    EmptyDistribution,
    #[error("paragraph {0} is too short to sample a reason from")]
    ParagraphTooShort(String),
}
