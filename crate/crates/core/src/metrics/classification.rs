use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Label12, Paragraph};

/// Decision counts for one label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// Gold (paragraph, label) pairs behind these counts.
    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }
}

/// `num / den`, with 0/0 read as 0.
pub fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(c: Counts) -> Self {
        let precision = ratio(c.tp as f64, (c.tp + c.fp) as f64);
        let recall = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScore<L> {
    pub label: L,
    #[serde(flatten)]
    pub counts: Counts,
    #[serde(flatten)]
    pub scores: Prf,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AverageScores {
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_: Prf,
    pub weighted: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scoreboard<L> {
    pub classes: Vec<ClassScore<L>>,
    pub averages: AverageScores,
    pub total_support: usize,
}

/// Per-label counts for one paragraph. Both sides are sets, so repeated
/// gold annotations or repeated predictions of a label count once.
pub fn match_label_sets<L: Ord + Copy>(gold: &BTreeSet<L>, predicted: &BTreeSet<L>) -> BTreeMap<L, Counts> {
    let mut out = BTreeMap::new();
    for &l in gold.union(predicted) {
        let (g, p) = (gold.contains(&l), predicted.contains(&l));
        out.insert(
            l,
            Counts {
                tp: (g && p) as usize,
                fp: (p && !g) as usize,
                fn_: (g && !p) as usize,
            },
        );
    }
    out
}

pub fn match_predictions(paragraph: &Paragraph, predicted: &BTreeSet<Label12>) -> BTreeMap<Label12, Counts> {
    match_label_sets(&paragraph.gold_labels(), predicted)
}

/// Pools per-paragraph counts and scores every label in `universe`.
/// Labels outside the universe are ignored.
pub fn aggregate<'a, L, I>(universe: &[L], per_paragraph: I) -> Scoreboard<L>
where
    L: Ord + Copy + 'a,
    I: IntoIterator<Item = &'a BTreeMap<L, Counts>>,
{
    let mut pooled: BTreeMap<L, Counts> = universe.iter().map(|&l| (l, Counts::default())).collect();
    for counts in per_paragraph {
        for (l, c) in counts {
            if let Some(slot) = pooled.get_mut(l) {
                slot.add(*c);
            }
        }
    }
    let classes: Vec<ClassScore<L>> = universe
        .iter()
        .map(|l| {
            let counts = pooled[l];
            ClassScore {
                label: *l,
                counts,
                scores: Prf::from_counts(counts),
                support: counts.support(),
            }
        })
        .collect();

    let mut total = Counts::default();
    for c in &classes {
        total.add(c.counts);
    }
    let micro = Prf::from_counts(total);

    let n = classes.len() as f64;
    let mean = |f: fn(&Prf) -> f64| ratio(classes.iter().map(|c| f(&c.scores)).sum(), n);
    let macro_ = Prf {
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        f1: mean(|s| s.f1),
    };

    let total_support = total.support();
    let wmean = |f: fn(&Prf) -> f64| {
        ratio(
            classes.iter().map(|c| f(&c.scores) * c.support as f64).sum(),
            total_support as f64,
        )
    };
    let weighted = Prf {
        precision: wmean(|s| s.precision),
        recall: wmean(|s| s.recall),
        f1: wmean(|s| s.f1),
    };

    Scoreboard {
        classes,
        averages: AverageScores {
            micro,
            macro_,
            weighted,
        },
        total_support,
    }
}

/// [`aggregate`] over the twelve categories.
pub fn aggregate_label12<'a, I>(per_paragraph: I) -> Scoreboard<Label12>
where
    I: IntoIterator<Item = &'a BTreeMap<Label12, Counts>>,
{
    aggregate(&Label12::ALL, per_paragraph)
}
