use serde::Serialize;

use super::PipelineError;
use crate::corpus::{Label12, Paragraph};
use crate::gateway::MASK_TOKEN;
use crate::text;

/// A generated pair whose reason was found in the paragraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeptPair {
    pub label: Label12,
    /// Reason as generated.
    pub reason: String,
    /// The matching excerpt of the original text.
    pub excerpt: String,
    /// Character span of `excerpt`.
    pub span: (usize, usize),
}

/// Keeps the pairs whose reason occurs in the paragraph under
/// normalization (lowercase, collapsed whitespace). The first occurrence
/// wins.
pub fn hallucination_filter(
    paragraph: &Paragraph,
    pairs: Vec<(Label12, String)>,
) -> (Vec<KeptPair>, Vec<(Label12, String)>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (label, reason) in pairs {
        match text::find_normalized(&paragraph.text, &reason) {
            Some((start, end)) => {
                let excerpt = text::char_slice(&paragraph.text, start, end)
                    .expect("normalized match lies within the text")
                    .to_string();
                kept.push(KeptPair {
                    label,
                    reason,
                    excerpt,
                    span: (start, end),
                });
            }
            None => dropped.push((label, reason)),
        }
    }
    (kept, dropped)
}

/// Replaces the character span `[start, end)` of `text` with the mask token.
pub fn mask_reason(text: &str, span: (usize, usize)) -> Result<String, PipelineError> {
    let (start, end) = span;
    let len = text::char_len(text);
    if start >= end || end > len {
        return Err(PipelineError::InvalidSpan { start, end, len });
    }
    let a = text::byte_offset(text, start).expect("checked above");
    let b = text::byte_offset(text, end).expect("checked above");
    let masked = format!("{}{MASK_TOKEN}{}", &text[..a], &text[b..]);
    if masked.matches(MASK_TOKEN).count() != 1 {
        return Err(PipelineError::MaskCollision);
    }
    Ok(masked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn para(text: &str) -> Paragraph {
        Paragraph::new("1", "1_0000", text, []).unwrap()
    }

    #[test]
    fn filter_examples() {
        let p = para("We collect your email address.");
        let (kept, dropped) = hallucination_filter(
            &p,
            vec![
                (Label12::FirstPartyCollectionUse, "collect your email".into()),
                (Label12::ThirdPartySharingCollection, "we sell your data".into()),
                (Label12::FirstPartyCollectionUse, "WE   COLLECT".into()),
            ],
        );
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].span, (3, 21));
        assert_eq!(kept[1].excerpt, "We collect");
        assert_eq!(
            dropped,
            vec![(Label12::ThirdPartySharingCollection, "we sell your data".to_string())]
        );
    }

    #[test]
    fn first_occurrence_is_used() {
        let p = para("opt out here, or opt out there");
        let (kept, _) = hallucination_filter(&p, vec![(Label12::UserChoiceControl, "opt out".into())]);
        assert_eq!(kept[0].span, (0, 7));
    }

    #[test]
    fn mask_examples() {
        assert_eq!(mask_reason("A B C", (2, 3)).unwrap(), "A <BLANK> C");
        assert_eq!(mask_reason("A B C", (0, 5)).unwrap(), "<BLANK>");
        assert!(matches!(
            mask_reason("A B C", (2, 9)),
            Err(PipelineError::InvalidSpan { .. })
        ));
        assert!(matches!(
            mask_reason("A B C", (2, 2)),
            Err(PipelineError::InvalidSpan { .. })
        ));
        assert!(matches!(
            mask_reason("x <BLANK> y", (0, 1)),
            Err(PipelineError::MaskCollision)
        ));
        assert_eq!(mask_reason("héllo wörld", (6, 11)).unwrap(), "héllo <BLANK>");
    }

    proptest! {
        #[test]
        fn kept_reasons_are_recoverable(
            text in "[a-cA-C é\n]{1,40}",
            a in 0usize..40,
            b in 0usize..40,
            upper in any::<bool>(),
        ) {
            let p = para(&text);
            let n = text::char_len(&text);
            let (s, e) = (a.min(b) % n, (a.max(b) % n) + 1);
            prop_assume!(s < e);
            let mut reason = text::char_slice(&text, s, e).unwrap().to_string();
            if upper {
                reason = reason.to_uppercase();
            }
            let (kept, dropped) = hallucination_filter(&p, vec![(Label12::DataSecurity, reason.clone())]);
            if text::normalize_query(&reason).is_empty() {
                prop_assert!(kept.is_empty());
                return Ok(());
            }
            prop_assert!(dropped.is_empty());
            let k = &kept[0];
            prop_assert_eq!(text::char_slice(&text, k.span.0, k.span.1).unwrap(), k.excerpt.as_str());
            prop_assert_eq!(text::normalize_query(&k.excerpt), text::normalize_query(&reason));
            let masked = mask_reason(&text, k.span).unwrap();
            prop_assert_eq!(masked.replacen(MASK_TOKEN, &k.excerpt, 1), text);
        }
    }
}
