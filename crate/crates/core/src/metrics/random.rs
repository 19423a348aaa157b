//! Random-excerpt reasons: a control for the explainability scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MetricsError;
use crate::corpus::Paragraph;
use crate::gateway::sha256_hex;
use crate::pipeline::PredictionRecord;
use crate::text;

/// Empirical distribution of annotation-length / paragraph-length ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthRatios {
    sorted: Vec<f64>,
}

impl LengthRatios {
    pub fn from_ratios(mut ratios: Vec<f64>) -> Result<Self, MetricsError> {
        ratios.retain(|r| r.is_finite() && *r > 0.0);
        if ratios.is_empty() {
            return Err(MetricsError::EmptyDistribution);
        }
        for r in &mut ratios {
            *r = r.min(1.0);
        }
        ratios.sort_by(f64::total_cmp);
        Ok(LengthRatios { sorted: ratios })
    }

    /// One ratio per gold annotation.
    pub fn from_paragraphs<'a>(paragraphs: impl IntoIterator<Item = &'a Paragraph>) -> Result<Self, MetricsError> {
        let mut ratios = Vec::new();
        for p in paragraphs {
            let n = p.char_len();
            if n == 0 {
                continue;
            }
            for a in &p.annotations {
                ratios.push((a.span_end - a.span_start) as f64 / n as f64);
            }
        }
        Self::from_ratios(ratios)
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Empirical CDF at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|r| *r <= x) as f64 / self.sorted.len() as f64
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.sorted[rng.gen_range(0..self.sorted.len())]
    }
}

/// Deterministic RNG for one (seed, paragraph, annotation) draw.
pub fn draw_rng(seed: u64, paragraph_id: &str, index: usize) -> ChaCha8Rng {
    let digest = sha256_hex(format!("{seed}\u{1f}{paragraph_id}\u{1f}{index}").as_bytes());
    let mut bytes = [0u8; 32];
    hex::decode_to_slice(&digest, &mut bytes).expect("sha256 hex is 32 bytes");
    ChaCha8Rng::from_seed(bytes)
}

/// Samples a contiguous character span of `paragraph` whose length follows
/// `ratios`: length = max(1, round(r * n)), start uniform.
pub fn random_reason_span<R: Rng>(
    paragraph: &Paragraph,
    ratios: &LengthRatios,
    rng: &mut R,
) -> Result<(usize, usize), MetricsError> {
    let n = paragraph.char_len();
    if n == 0 {
        return Err(MetricsError::ParagraphTooShort(paragraph.paragraph_id.clone()));
    }
    let r = ratios.sample(rng);
    let len = ((r * n as f64).round() as usize).clamp(1, n);
    let start = rng.gen_range(0..=n - len);
    Ok((start, start + len))
}

/// One prediction per gold annotation: its gold label and a random span
/// of the same paragraph as the reason. Output is sorted by paragraph id.
pub fn random_reason_baseline<'a>(
    paragraphs: impl IntoIterator<Item = &'a Paragraph>,
    ratios: &LengthRatios,
    seed: u64,
) -> Result<Vec<PredictionRecord>, MetricsError> {
    let mut paragraphs: Vec<&Paragraph> = paragraphs.into_iter().collect();
    paragraphs.sort_by(|a, b| a.paragraph_id.cmp(&b.paragraph_id));
    let mut out = Vec::new();
    for p in paragraphs {
        for (i, a) in p.annotations.iter().enumerate() {
            let mut rng = draw_rng(seed, &p.paragraph_id, i);
            let (start, end) = random_reason_span(p, ratios, &mut rng)?;
            let reason = text::char_slice(&p.text, start, end).expect("span within paragraph");
            out.push(PredictionRecord {
                paragraph_id: p.paragraph_id.clone(),
                label: a.label,
                reason: reason.to_string(),
                reason_span: [start, end],
                refill: String::new(),
                score: 1.0,
                accepted: true,
            });
        }
    }
    Ok(out)
}
