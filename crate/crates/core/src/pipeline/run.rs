use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::filter::{hallucination_filter, mask_reason, KeptPair};
use super::verifier::{Verifier, VerifierInput};
use super::{PipelineError, PredictionRecord};
use crate::corpus::{Label12, Paragraph};
use crate::gateway::{
    build_classifier_prompt, build_filler_prompt, parse_classifier_output, parse_filler_output, Gateway, GatewayError,
    ReasonedPrediction, Refill, Role,
};
use crate::jsonl;

/// Where pairs were lost between generation and verification.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    /// Well-formed pairs parsed from classifier output.
    pub pairs: usize,
    pub malformed_lines: usize,
    pub unknown_labels: usize,
    pub hallucinated: usize,
    pub mask_failures: usize,
    pub empty_refills: usize,
}

impl StageCounts {
    pub fn add(&mut self, o: &StageCounts) {
        self.pairs += o.pairs;
        self.malformed_lines += o.malformed_lines;
        self.unknown_labels += o.unknown_labels;
        self.hallucinated += o.hallucinated;
        self.mask_failures += o.mask_failures;
        self.empty_refills += o.empty_refills;
    }
}

/// Stage 1 and 2 output for one paragraph.
#[derive(Debug, Clone, PartialEq)]
pub struct Explained {
    pub paragraph_id: String,
    pub raw_generation: String,
    pub kept: Vec<KeptPair>,
    /// Refills, each with the index of its pair in `kept`.
    pub refills: Vec<(usize, Refill)>,
    pub counts: StageCounts,
}

/// Runs the explained classifier, filters its pairs and refills every
/// kept reason.
pub fn explain_and_refill(paragraph: &Paragraph, gateway: &Gateway) -> Result<Explained, PipelineError> {
    let raw = gateway.generate_prompt(Role::ExplainedClassifier, build_classifier_prompt(paragraph))?;
    let parsed = parse_classifier_output(&raw);
    let mut counts = StageCounts {
        pairs: parsed.pairs.len(),
        malformed_lines: parsed.malformed,
        unknown_labels: parsed.unknown_label,
        ..Default::default()
    };
    let (kept, dropped) = hallucination_filter(paragraph, parsed.pairs);
    counts.hallucinated = dropped.len();

    let mut refills = Vec::with_capacity(kept.len());
    for (i, pair) in kept.iter().enumerate() {
        let masked = match mask_reason(&paragraph.text, pair.span) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("{}: cannot mask {:?}: {e}", paragraph.paragraph_id, pair.span);
                counts.mask_failures += 1;
                continue;
            }
        };
        let prompt = build_filler_prompt(&masked, pair.label)?;
        let raw_fill = gateway.generate_prompt(Role::BlankFiller, prompt)?;
        match parse_filler_output(&raw_fill) {
            Ok(text) => refills.push((
                i,
                Refill {
                    paragraph_id: paragraph.paragraph_id.clone(),
                    label: pair.label,
                    refill_text: text,
                },
            )),
            Err(GatewayError::EmptyGeneration) => counts.empty_refills += 1,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Explained {
        paragraph_id: paragraph.paragraph_id.clone(),
        raw_generation: raw,
        kept,
        refills,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub prediction: ReasonedPrediction,
    pub reason_span: (usize, usize),
    pub refill: Refill,
    pub score: f64,
    pub accepted: bool,
}

impl Verdict {
    pub fn record(&self) -> PredictionRecord {
        PredictionRecord {
            paragraph_id: self.prediction.paragraph_id.clone(),
            label: self.prediction.label,
            reason: self.prediction.reason.clone(),
            reason_span: [self.reason_span.0, self.reason_span.1],
            refill: self.refill.refill_text.clone(),
            score: self.score,
            accepted: self.accepted,
        }
    }
}

/// Everything produced for one paragraph.
#[derive(Debug, Clone, PartialEq)]
pub struct ParagraphOutcome {
    pub paragraph_id: String,
    pub kept: Vec<KeptPair>,
    pub verdicts: Vec<Verdict>,
    pub counts: StageCounts,
    pub threshold: f64,
}

impl ParagraphOutcome {
    /// Deduplicated labels of accepted verdicts.
    pub fn predicted_labels(&self) -> BTreeSet<Label12> {
        self.verdicts
            .iter()
            .filter(|v| v.accepted)
            .map(|v| v.prediction.label)
            .collect()
    }

    /// The outcome as if it had been run at another threshold.
    pub fn rethreshold(&self, threshold: f64) -> ParagraphOutcome {
        let mut out = self.clone();
        out.threshold = threshold;
        for v in &mut out.verdicts {
            v.accepted = v.score >= threshold;
        }
        out
    }
}

fn check_threshold(t: f64) -> Result<(), PipelineError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(PipelineError::InvalidThreshold(t))
    }
}

/// Scores refilled pairs and applies the threshold.
pub(crate) fn verdicts_for(
    explained: &Explained,
    verifier: &dyn Verifier,
    threshold: f64,
) -> Result<Vec<Verdict>, PipelineError> {
    let mut verdicts = Vec::with_capacity(explained.refills.len());
    for (i, refill) in &explained.refills {
        let pair = &explained.kept[*i];
        let input = VerifierInput::new(pair.label, &pair.excerpt, &refill.refill_text)?;
        let score = verifier.score(&input)?;
        verdicts.push(Verdict {
            prediction: ReasonedPrediction {
                paragraph_id: explained.paragraph_id.clone(),
                label: pair.label,
                reason: pair.excerpt.clone(),
                raw_generation: explained.raw_generation.clone(),
            },
            reason_span: pair.span,
            refill: refill.clone(),
            score,
            accepted: score >= threshold,
        });
    }
    Ok(verdicts)
}

/// All three stages for one paragraph. A paragraph whose pairs are all
/// dropped yields no verdicts.
pub fn classify_paragraph(
    paragraph: &Paragraph,
    gateway: &Gateway,
    verifier: &dyn Verifier,
    threshold: f64,
) -> Result<ParagraphOutcome, PipelineError> {
    check_threshold(threshold)?;
    let explained = explain_and_refill(paragraph, gateway)?;
    let verdicts = verdicts_for(&explained, verifier, threshold)?;
    Ok(ParagraphOutcome {
        paragraph_id: explained.paragraph_id,
        kept: explained.kept,
        verdicts,
        counts: explained.counts,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceConfig {
    pub threshold: f64,
    /// Paragraphs in flight at once.
    pub concurrency: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            threshold: super::DEFAULT_THRESHOLD,
            concurrency: 4,
        }
    }
}

/// Maps `f` over `items` with at most `concurrency` in flight. Results keep
/// input order; the first error (in input order) is returned.
pub(crate) fn par_map<T: Sync, R: Send>(
    items: &[T],
    concurrency: usize,
    f: impl Fn(&T) -> Result<R, PipelineError> + Sync + Send,
) -> Result<Vec<R>, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    let results: Vec<Result<R, PipelineError>> = pool.install(|| items.par_iter().map(&f).collect());
    results.into_iter().collect()
}

pub(crate) fn sorted_by_id<'a>(paragraphs: &[&'a Paragraph]) -> Vec<&'a Paragraph> {
    let mut sorted = paragraphs.to_vec();
    sorted.sort_by(|a, b| a.paragraph_id.cmp(&b.paragraph_id));
    sorted
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub paragraphs: usize,
    #[serde(flatten)]
    pub counts: StageCounts,
    pub verdicts: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub threshold: f64,
    pub model: String,
    pub verifier: String,
    pub backend_calls: usize,
    pub cache_hits: usize,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.counts;
        writeln!(f, "paragraphs:        {}", self.paragraphs)?;
        writeln!(f, "parsed pairs:      {}", c.pairs)?;
        writeln!(f, "malformed lines:   {}", c.malformed_lines)?;
        writeln!(f, "unknown labels:    {}", c.unknown_labels)?;
        writeln!(f, "hallucinated:      {}", c.hallucinated)?;
        writeln!(f, "mask failures:     {}", c.mask_failures)?;
        writeln!(f, "empty refills:     {}", c.empty_refills)?;
        writeln!(f, "verdicts:          {}", self.verdicts)?;
        writeln!(
            f,
            "accepted:          {} ({:.1}% at threshold {})",
            self.accepted,
            self.acceptance_rate * 100.0,
            self.threshold
        )?;
        writeln!(f, "model:             {}", self.model)?;
        writeln!(f, "verifier:          {}", self.verifier)?;
        write!(
            f,
            "{} backend calls, {} cache hits",
            self.backend_calls, self.cache_hits
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceRun {
    /// Sorted by paragraph id.
    pub outcomes: Vec<ParagraphOutcome>,
    pub summary: RunSummary,
}

impl InferenceRun {
    /// Prediction lines in paragraph-id order, verdicts in generation order.
    pub fn records(&self) -> Vec<PredictionRecord> {
        self.outcomes
            .iter()
            .flat_map(|o| o.verdicts.iter().map(Verdict::record))
            .collect()
    }
}

/// Classifies every paragraph and, when `out` is given, writes the
/// predictions file.
pub fn run_inference(
    paragraphs: &[&Paragraph],
    gateway: &Gateway,
    verifier: &dyn Verifier,
    config: &InferenceConfig,
    out: Option<&Path>,
) -> Result<InferenceRun, PipelineError> {
    check_threshold(config.threshold)?;
    let before = gateway.stats();
    let sorted = sorted_by_id(paragraphs);
    let outcomes = par_map(&sorted, config.concurrency, |p| {
        classify_paragraph(p, gateway, verifier, config.threshold)
    })?;
    let after = gateway.stats();

    let mut counts = StageCounts::default();
    let (mut verdicts, mut accepted) = (0, 0);
    for o in &outcomes {
        counts.add(&o.counts);
        verdicts += o.verdicts.len();
        accepted += o.verdicts.iter().filter(|v| v.accepted).count();
    }
    let run = InferenceRun {
        summary: RunSummary {
            paragraphs: outcomes.len(),
            counts,
            verdicts,
            accepted,
            acceptance_rate: if verdicts == 0 {
                0.0
            } else {
                accepted as f64 / verdicts as f64
            },
            threshold: config.threshold,
            model: gateway.model_id().to_string(),
            verifier: verifier.id(),
            backend_calls: after.backend_calls - before.backend_calls,
            cache_hits: after.cache_hits - before.cache_hits,
        },
        outcomes,
    };
    if let Some(path) = out {
        jsonl::write(path, &run.records())?;
    }
    Ok(run)
}
