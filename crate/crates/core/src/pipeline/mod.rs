//! The three-stage classifier: explained classification with a
//! hallucination filter, masked-reason refill, and verification of the
//! (label, reason, refill) triple. Also builds the verifier's training set
//! and the stage ablation.

mod ablation;
mod entail;
mod filter;
mod run;
mod verifier;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::Label12;
use crate::gateway::GatewayError;
use crate::jsonl::JsonlError;

pub use ablation::{ablation, AblationReport, AblationRow, ABLATION_CONFIGS, DEFAULT_GLOSS_THRESHOLD};
pub use entail::{build_entailment_dataset, entailment_label, EntailmentExample, EntailmentSet, EntailmentSummary};
pub use filter::{hallucination_filter, mask_reason, KeptPair};
pub use run::{
    classify_paragraph, explain_and_refill, run_inference, Explained, InferenceConfig, InferenceRun, ParagraphOutcome,
    RunSummary, StageCounts, Verdict,
};
pub use verifier::{LexicalBaseline, RemoteScorer, Verifier, VerifierInput, SEP};

/// Default acceptance threshold on verifier scores.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("span [{start}, {end}) is invalid for a text of {len} characters")]
    InvalidSpan { start: usize, end: usize, len: usize },
    #[error("text already contains the mask token")]
    MaskCollision,
    #[error("invalid verifier input: {0}")]
    InvalidVerifierInput(String),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub paragraph_id: String,
    pub label: Label12,
    pub reason: String,
    pub reason_span: [usize; 2],
    pub refill: String,
    pub score: f64,
    pub accepted: bool,
}
