use std::fmt;

use serde::Serialize;

use super::{Label12, Paragraph, Side, Split};

/// Share of paragraphs by number of distinct gold labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LabelHistogram {
    pub zero: usize,
    pub one: usize,
    pub two: usize,
    pub three_plus: usize,
}

impl LabelHistogram {
    pub fn total(&self) -> usize {
        self.zero + self.one + self.two + self.three_plus
    }

    fn pct(&self, n: usize) -> f64 {
        match self.total() {
            0 => 0.0,
            t => 100.0 * n as f64 / t as f64,
        }
    }

    /// Percentages for (1, 2, 3+) labels.
    pub fn percentages(&self) -> (f64, f64, f64) {
        (self.pct(self.one), self.pct(self.two), self.pct(self.three_plus))
    }

    fn add(&mut self, labels: usize) {
        match labels {
            0 => self.zero += 1,
            1 => self.one += 1,
            2 => self.two += 1,
            _ => self.three_plus += 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SideStats {
    pub policies: usize,
    pub paragraphs: usize,
    /// Per-class (paragraph, label) support in [`Label12::ALL`] order.
    pub support: Vec<(Label12, usize)>,
    pub histogram: LabelHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsTable {
    pub policies: usize,
    pub paragraphs: usize,
    pub annotations: usize,
    pub train: SideStats,
    pub test: SideStats,
    /// Paragraphs whose policy the split does not assign.
    pub unassigned: usize,
}

pub fn corpus_stats(paragraphs: &[Paragraph], split: &Split) -> StatsTable {
    let mut sides = [SideStats::default(), SideStats::default()];
    for s in &mut sides {
        s.support = Label12::ALL.iter().map(|&l| (l, 0)).collect();
    }
    let mut unassigned = 0;
    for p in paragraphs {
        let side = match split.side_of(&p.policy_id) {
            Some(Side::Train) => &mut sides[0],
            Some(Side::Test) => &mut sides[1],
            None => {
                unassigned += 1;
                continue;
            }
        };
        side.paragraphs += 1;
        let labels = p.gold_labels();
        side.histogram.add(labels.len());
        for l in labels {
            side.support[l.index()].1 += 1;
        }
    }
    let [mut train, mut test] = sides;
    train.policies = split
        .train_policy_ids
        .iter()
        .filter(|id| paragraphs.iter().any(|p| &p.policy_id == *id))
        .count();
    test.policies = split
        .test_policy_ids
        .iter()
        .filter(|id| paragraphs.iter().any(|p| &p.policy_id == *id))
        .count();
    StatsTable {
        policies: super::split::policy_ids(paragraphs).len(),
        paragraphs: paragraphs.len(),
        annotations: paragraphs.iter().map(|p| p.annotations.len()).sum(),
        train,
        test,
        unassigned,
    }
}

impl StatsTable {
    /// Relative deviation of the (train, test) paragraph counts from a
    /// reference pair, as fractions.
    pub fn deviation_from(&self, train_ref: usize, test_ref: usize) -> (f64, f64) {
        let rel = |got: usize, want: usize| {
            if want == 0 {
                0.0
            } else {
                (got as f64 - want as f64) / want as f64
            }
        };
        (
            rel(self.train.paragraphs, train_ref),
            rel(self.test.paragraphs, test_ref),
        )
    }
}

impl fmt::Display for StatsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "policies: {}", self.policies)?;
        writeln!(f, "paragraphs: {}", self.paragraphs)?;
        writeln!(f, "annotations: {}", self.annotations)?;
        if self.unassigned > 0 {
            writeln!(f, "unassigned paragraphs: {}", self.unassigned)?;
        }
        for (name, s) in [("train", &self.train), ("test", &self.test)] {
            let (one, two, three) = s.histogram.percentages();
            writeln!(
                f,
                "{name}: {} policies, {} paragraphs; labels/paragraph 1: {one:.1}%  2: {two:.1}%  3+: {three:.1}%",
                s.policies, s.paragraphs
            )?;
        }
        writeln!(f, "{:<36}{:>8}{:>8}", "Class", "train", "test")?;
        for ((label, tr), (_, te)) in self.train.support.iter().zip(&self.test.support) {
            writeln!(f, "{:<36}{:>8}{:>8}", label.name(), tr, te)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::split_from_lists;
    use Label12::*;

    fn para(id: &str, labels: &[Label12]) -> Paragraph {
        let text = "abcdefghij".to_string();
        Paragraph::new("p", id, text, labels.iter().enumerate().map(|(i, &l)| (l, i, i + 1))).unwrap()
    }

    #[test]
    fn single_paragraph_histogram() {
        let ps = vec![para("a", &[DataSecurity])];
        let split = split_from_lists(&ps, ["p".to_string()], []).unwrap();
        let st = corpus_stats(&ps, &split);
        assert_eq!(st.train.histogram.percentages(), (100.0, 0.0, 0.0));
        assert_eq!(st.test.paragraphs, 0);
    }

    #[test]
    fn four_paragraph_histogram() {
        // hand count: labels per paragraph 1,1,2,3 -> 2/4, 1/4, 1/4
        let ps = vec![
            para("a", &[DataSecurity]),
            para("b", &[PolicyChange, PolicyChange]),
            para("c", &[DataSecurity, DoNotTrack]),
            para("d", &[DataSecurity, DoNotTrack, DataRetention]),
        ];
        let split = split_from_lists(&ps, ["p".to_string()], []).unwrap();
        let st = corpus_stats(&ps, &split);
        assert_eq!(st.train.histogram.percentages(), (50.0, 25.0, 25.0));
        assert_eq!(st.train.support[DataSecurity.index()], (DataSecurity, 3));
        assert_eq!(st.train.support[PolicyChange.index()], (PolicyChange, 1));
        assert_eq!(st.annotations, 8);
        assert_eq!(st.train.policies, 1);
    }

    #[test]
    fn deviation() {
        let ps = vec![para("a", &[DataSecurity])];
        let split = split_from_lists(&ps, ["p".to_string()], []).unwrap();
        let (tr, te) = corpus_stats(&ps, &split).deviation_from(2, 0);
        assert_eq!((tr, te), (-0.5, 0.0));
    }
}
