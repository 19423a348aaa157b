use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{explain_and_refill, par_map, sorted_by_id, StageCounts};
use super::verifier::VerifierInput;
use super::PipelineError;
use crate::corpus::{Label12, Paragraph};
use crate::gateway::Gateway;
use crate::jsonl;
use crate::metrics::word_overlap;

/// One training example for the verifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntailmentExample {
    pub paragraph_id: String,
    pub label: Label12,
    pub reason: String,
    pub refill: String,
    pub encoded: String,
    /// 1 when the predicted label is a gold label of the paragraph, else 0.
    pub entailment: u8,
    /// Highest word overlap between the reason and any gold excerpt of the
    /// paragraph. Informational only.
    pub gold_reason_overlap: f64,
}

pub fn entailment_label(predicted: Label12, gold: &BTreeSet<Label12>) -> u8 {
    u8::from(gold.contains(&predicted))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntailmentSummary {
    pub paragraphs: usize,
    pub examples: usize,
    pub entailment: usize,
    pub contradiction: usize,
    #[serde(flatten)]
    pub counts: StageCounts,
    pub model: String,
    pub backend_calls: usize,
    pub cache_hits: usize,
}

impl fmt::Display for EntailmentSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let share = |n: usize| {
            if self.examples == 0 {
                0.0
            } else {
                n as f64 * 100.0 / self.examples as f64
            }
        };
        writeln!(f, "paragraphs:      {}", self.paragraphs)?;
        writeln!(f, "examples:        {}", self.examples)?;
        writeln!(
            f,
            "entailment (1):  {} ({:.1}%)",
            self.entailment,
            share(self.entailment)
        )?;
        writeln!(
            f,
            "contradiction(0): {} ({:.1}%)",
            self.contradiction,
            share(self.contradiction)
        )?;
        writeln!(
            f,
            "dropped: {} malformed, {} unknown label, {} hallucinated, {} mask failures, {} empty refills",
            self.counts.malformed_lines,
            self.counts.unknown_labels,
            self.counts.hallucinated,
            self.counts.mask_failures,
            self.counts.empty_refills
        )?;
        writeln!(f, "model:           {}", self.model)?;
        write!(
            f,
            "{} backend calls, {} cache hits",
            self.backend_calls, self.cache_hits
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntailmentSet {
    pub examples: Vec<EntailmentExample>,
    pub summary: EntailmentSummary,
}

/// Runs stages 1 and 2 over training paragraphs and labels every refilled
/// pair by whether its label is gold. Examples are ordered by paragraph id,
/// then by position in the generation. Completed requests land in the
/// gateway cache as they finish, so an interrupted run resumes cheaply.
pub fn build_entailment_dataset(
    paragraphs: &[&Paragraph],
    gateway: &Gateway,
    concurrency: usize,
    out: Option<&Path>,
) -> Result<EntailmentSet, PipelineError> {
    let before = gateway.stats();
    let sorted = sorted_by_id(paragraphs);
    let per_paragraph = par_map(&sorted, concurrency, |p| {
        let explained = explain_and_refill(p, gateway)?;
        let gold = p.gold_labels();
        let mut examples = Vec::with_capacity(explained.refills.len());
        for (i, refill) in &explained.refills {
            let pair = &explained.kept[*i];
            let input = VerifierInput::new(pair.label, &pair.excerpt, &refill.refill_text)?;
            let gold_reason_overlap = p
                .annotations
                .iter()
                .map(|a| word_overlap(&a.reason_text, &pair.excerpt))
                .fold(0.0, f64::max);
            examples.push(EntailmentExample {
                paragraph_id: p.paragraph_id.clone(),
                label: pair.label,
                reason: input.reason,
                refill: input.refill,
                encoded: input.encoded,
                entailment: entailment_label(pair.label, &gold),
                gold_reason_overlap,
            });
        }
        Ok((examples, explained.counts))
    })?;
    let after = gateway.stats();

    let mut counts = StageCounts::default();
    let mut examples = Vec::new();
    for (ex, c) in per_paragraph {
        counts.add(&c);
        examples.extend(ex);
    }
    let entailment = examples.iter().filter(|e| e.entailment == 1).count();
    let set = EntailmentSet {
        summary: EntailmentSummary {
            paragraphs: sorted.len(),
            examples: examples.len(),
            entailment,
            contradiction: examples.len() - entailment,
            counts,
            model: gateway.model_id().to_string(),
            backend_calls: after.backend_calls - before.backend_calls,
            cache_hits: after.cache_hits - before.cache_hits,
        },
        examples,
    };
    if let Some(path) = out {
        jsonl::write(path, &set.examples)?;
    }
    Ok(set)
}
