use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Label12, Paragraph, Side, Split};
use crate::jsonl::{self, JsonlError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalSpan {
    pub label: Label12,
    pub span_start: usize,
    pub span_end: usize,
}

/// One line of the canonical corpus file. The reason text is derived from
/// the span on load and never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalRecord {
    pub policy_id: String,
    pub paragraph_id: String,
    pub split: Side,
    pub text: String,
    pub annotations: Vec<CanonicalSpan>,
}

fn records(paragraphs: &[Paragraph], split: &Split) -> Result<Vec<CanonicalRecord>, CorpusError> {
    let mut sorted: Vec<&Paragraph> = paragraphs.iter().collect();
    sorted.sort_by(|a, b| {
        (a.policy_id.as_str(), a.paragraph_id.as_str()).cmp(&(b.policy_id.as_str(), b.paragraph_id.as_str()))
    });
    sorted
        .into_iter()
        .map(|p| {
            let side = split.side_of(&p.policy_id).ok_or_else(|| {
                CorpusError::InvalidSplit(format!("policy `{}` is not assigned to a side", p.policy_id))
            })?;
            Ok(CanonicalRecord {
                policy_id: p.policy_id.clone(),
                paragraph_id: p.paragraph_id.clone(),
                split: side,
                text: p.text.clone(),
                annotations: p
                    .annotations
                    .iter()
                    .map(|a| CanonicalSpan {
                        label: a.label,
                        span_start: a.span_start,
                        span_end: a.span_end,
                    })
                    .collect(),
            })
        })
        .collect()
}

/// Canonical JSONL text, sorted by (policy_id, paragraph_id).
pub fn write_canonical(paragraphs: &[Paragraph], split: &Split) -> Result<String, CorpusError> {
    Ok(jsonl::to_string(&records(paragraphs, split)?))
}

pub fn export_canonical(paragraphs: &[Paragraph], split: &Split, out_path: &Path) -> Result<usize, CorpusError> {
    let recs = records(paragraphs, split)?;
    jsonl::write(out_path, &recs).map_err(|e| match e {
        JsonlError::Io { path, source } => CorpusError::io(path, source),
        JsonlError::Parse { path, line, message } => CorpusError::malformed(path, Some(line), message),
    })
}

/// Loads a canonical corpus file, re-deriving reasons and the split.
pub fn load_canonical(path: &Path) -> Result<(Vec<Paragraph>, Split), CorpusError> {
    let recs: Vec<CanonicalRecord> = jsonl::read(path).map_err(|e| match e {
        JsonlError::Io { path, source } => CorpusError::malformed(&path, None, source.to_string()),
        JsonlError::Parse { path, line, message } => CorpusError::malformed(path, Some(line), message),
    })?;
    let mut sides: BTreeMap<String, Side> = BTreeMap::new();
    let mut seen = std::collections::HashSet::new();
    let mut paragraphs = Vec::with_capacity(recs.len());
    for (i, r) in recs.into_iter().enumerate() {
        let line = Some(i as u64 + 1);
        if !seen.insert(r.paragraph_id.clone()) {
            return Err(CorpusError::malformed(
                path,
                line,
                format!("duplicate paragraph_id `{}`", r.paragraph_id),
            ));
        }
        if let Some(prev) = sides.insert(r.policy_id.clone(), r.split) {
            if prev != r.split {
                return Err(CorpusError::malformed(
                    path,
                    line,
                    format!("policy `{}` appears in both splits", r.policy_id),
                ));
            }
        }
        let p = Paragraph::new(
            r.policy_id,
            r.paragraph_id,
            r.text,
            r.annotations.into_iter().map(|a| (a.label, a.span_start, a.span_end)),
        )
        .map_err(|e| CorpusError::malformed(path, line, e.to_string()))?;
        paragraphs.push(p);
    }
    let mut split = Split::default();
    for (id, side) in sides {
        match side {
            Side::Train => split.train_policy_ids.insert(id),
            Side::Test => split.test_policy_ids.insert(id),
        };
    }
    Ok((paragraphs, split))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::split_from_lists;

    fn fixture() -> (Vec<Paragraph>, Split) {
        let ps = vec![
            Paragraph::new(
                "b",
                "b_0000",
                "We keep logs for a year.",
                [(Label12::DataRetention, 13, 23)],
            )
            .unwrap(),
            Paragraph::new(
                "a",
                "a_0001",
                "Questions? Email \"privacy@x.com\".",
                [(Label12::PrivacyContactInformation, 11, 33)],
            )
            .unwrap(),
            Paragraph::new(
                "a",
                "a_0000",
                "We use SSL. Ünïcode text.",
                [(Label12::DataSecurity, 0, 11), (Label12::IntroductoryGeneric, 12, 25)],
            )
            .unwrap(),
        ];
        let split = split_from_lists(&ps, ["a".to_string()], ["b".to_string()]).unwrap();
        (ps, split)
    }

    #[test]
    fn golden_three_paragraphs() {
        let (ps, split) = fixture();
        let got = write_canonical(&ps, &split).unwrap();
        let want = concat!(
            r#"{"policy_id":"a","paragraph_id":"a_0000","split":"train","text":"We use SSL. Ünïcode text.","annotations":[{"label":"Data Security","span_start":0,"span_end":11},{"label":"Introductory/Generic","span_start":12,"span_end":25}]}"#,
            "\n",
            r#"{"policy_id":"a","paragraph_id":"a_0001","split":"train","text":"Questions? Email \"privacy@x.com\".","annotations":[{"label":"Privacy Contact Information","span_start":11,"span_end":33}]}"#,
            "\n",
            r#"{"policy_id":"b","paragraph_id":"b_0000","split":"test","text":"We keep logs for a year.","annotations":[{"label":"Data Retention","span_start":13,"span_end":23}]}"#,
            "\n",
        );
        assert_eq!(got, want);
        assert_eq!(write_canonical(&ps, &split).unwrap(), got);
    }

    #[test]
    fn round_trip_identity() {
        let (ps, split) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        assert_eq!(export_canonical(&ps, &split, &path).unwrap(), 3);
        let (back, split_back) = load_canonical(&path).unwrap();
        let mut sorted = ps.clone();
        sorted.sort_by(|a, b| a.paragraph_id.cmp(&b.paragraph_id));
        assert_eq!(back, sorted);
        assert_eq!(split_back, split);
    }

    #[test]
    fn empty_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        assert_eq!(export_canonical(&[], &Split::default(), &path).unwrap(), 0);
        assert_eq!(std::fs::read(&path).unwrap(), b"");
        let (ps, split) = load_canonical(&path).unwrap();
        assert!(ps.is_empty() && split == Split::default());
    }

    #[test]
    fn load_rejects_bad_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let cases = [
            r#"{"policy_id":"a","paragraph_id":"x","split":"train","text":"abc","annotations":[{"label":"Data Security","span_start":1,"span_end":9}]}"#,
            r#"{"policy_id":"a","paragraph_id":"x","split":"dev","text":"abc","annotations":[]}"#,
            "not json",
        ];
        for c in cases {
            std::fs::write(&path, format!("{c}\n")).unwrap();
            assert!(matches!(
                load_canonical(&path).unwrap_err(),
                CorpusError::MalformedSource { line: Some(1), .. }
            ));
        }
        std::fs::write(
            &path,
            "{\"policy_id\":\"a\",\"paragraph_id\":\"x\",\"split\":\"train\",\"text\":\"abc\",\"annotations\":[]}\n\
             {\"policy_id\":\"a\",\"paragraph_id\":\"y\",\"split\":\"test\",\"text\":\"abc\",\"annotations\":[]}\n",
        )
        .unwrap();
        assert!(matches!(
            load_canonical(&path).unwrap_err(),
            CorpusError::MalformedSource { line: Some(2), .. }
        ));
    }
}
