//! Deterministic synthetic corpus plus a mock script that imitates an
//! imperfect classifier and filler.
//!
//! Paragraphs are built from per-category sentences; each gold sentence is
//! one annotation. The scripted classifier emits correct pairs, pairs with a
//! wrong label on a real excerpt, and pairs whose reason does not occur in
//! the paragraph, at configurable rates. The scripted filler rebuilds
//! correct reasons with word-level noise and answers wrong-label prompts
//! with text typical of the wrong label.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{split_by_policy, Label12, Paragraph, Split};
use crate::gateway::{
    build_classifier_prompt, build_filler_prompt, parse_classifier_output, render_classifier_line, MockEntry, Role,
};
use crate::pipeline::{hallucination_filter, mask_reason};
use crate::text;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub paragraphs: usize,
    pub policies: usize,
    /// Policies assigned to the test side; the rest are training policies.
    pub test_policies: usize,
    /// Share of emitted pairs whose reason is not in the paragraph.
    pub hallucination_rate: f64,
    /// Share of in-text pairs whose label is not gold.
    pub wrong_label_rate: f64,
    /// Probability that a gold label is emitted at all.
    pub recall: f64,
    /// Probability that a correct reason is refilled with heavy noise.
    pub heavy_noise_rate: f64,
    /// Probability that the filler echoes a wrong-label reason, so the
    /// verifier cannot catch it.
    pub echo_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            paragraphs: 200,
            policies: 40,
            test_policies: 8,
            hallucination_rate: 0.3,
            wrong_label_rate: 0.4,
            recall: 0.9,
            heavy_noise_rate: 0.25,
            echo_rate: 0.1,
            seed: 7,
        }
    }
}

/// Realized counts of the scripted classifier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SyntheticStats {
    pub correct_pairs: usize,
    pub wrong_label_pairs: usize,
    pub hallucinated_pairs: usize,
    pub noise_lines: usize,
    pub filler_prompts: usize,
}

impl SyntheticStats {
    pub fn hallucination_rate(&self) -> f64 {
        let all = self.correct_pairs + self.wrong_label_pairs + self.hallucinated_pairs;
        self.hallucinated_pairs as f64 / all.max(1) as f64
    }

    pub fn wrong_label_rate(&self) -> f64 {
        self.wrong_label_pairs as f64 / (self.correct_pairs + self.wrong_label_pairs).max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticFixture {
    pub paragraphs: Vec<Paragraph>,
    pub split: Split,
    pub script: Vec<MockEntry>,
    pub stats: SyntheticStats,
}

const COMPANIES: [&str; 40] = [
    "Acme", "Borealis", "Cobalt", "Dunmore", "Elmwood", "Fjord", "Granite", "Harbor", "Ionic", "Juniper", "Kestrel",
    "Lumen", "Meridian", "Nimbus", "Oakline", "Pinnacle", "Quarry", "Redwood", "Summit", "Tundra", "Umber", "Vertex",
    "Willow", "Xenon", "Yarrow", "Zephyr", "Alder", "Beacon", "Cedar", "Delta", "Ember", "Falcon", "Glacier", "Heron",
    "Indigo", "Jasper", "Kodiak", "Lark", "Maple", "Nova",
];

const NEUTRAL: [&str; 4] = [
    "Thank you for choosing {c}.",
    "Last modified in March.",
    "See the sections below for details.",
    "Read on to learn more.",
];

const FILLER_WORDS: [&str; 10] = [
    "service", "website", "content", "time", "provide", "may", "our", "your", "any", "which",
];

struct Sentence {
    text: &'static str,
    confusable: Option<Label12>,
}

const fn plain(text: &'static str) -> Sentence {
    Sentence { text, confusable: None }
}

const fn mixed(text: &'static str, with: Label12) -> Sentence {
    Sentence {
        text,
        confusable: Some(with),
    }
}

fn sentences(label: Label12) -> &'static [Sentence] {
    use Label12::*;
    match label {
        FirstPartyCollectionUse => {
            const S: &[Sentence] = &[
                plain("{c} collects personal information such as your name when you register."),
                plain("We use the data we collect to operate and improve our services."),
                plain("We collect information about your device and how you use the first party site."),
                plain("When you make a purchase we collect payment information and billing details."),
                plain("We may use personal information to personalize content for you."),
                plain("Our servers automatically collect usage data including pages viewed."),
                mixed(
                    "We collect location data and share it with advertising partners.",
                    ThirdPartySharingCollection,
                ),
                mixed(
                    "We collect your email address so you can contact us with questions.",
                    PrivacyContactInformation,
                ),
            ];
            S
        }
        ThirdPartySharingCollection => {
            const S: &[Sentence] = &[
                plain("{c} may share your personal data with third parties who provide services to us."),
                plain("We disclose information to advertisers and analytics partners."),
                plain("Third party partners may collect data through cookies on our pages."),
                plain("We do not sell your information but we share it with affiliated companies."),
                plain("We may disclose data to third parties when required by law."),
                plain("Advertisers receive aggregated data about our audience."),
                mixed(
                    "Partners who receive your data must keep it secure with encryption.",
                    DataSecurity,
                ),
                mixed(
                    "You can opt out of sharing with third party advertisers in your settings.",
                    UserChoiceControl,
                ),
            ];
            S
        }
        UserChoiceControl => {
            const S: &[Sentence] = &[
                plain("You can opt out of marketing emails at any time."),
                plain("Use your account settings to control your privacy preferences."),
                plain("We ask for your consent before sending promotional messages."),
                plain("You may change your cookie preferences in the settings page."),
                plain("You have the choice to disable personalized ads."),
                plain("{c} lets you control which notifications you receive."),
                mixed(
                    "If you opt out we will delete your marketing preferences.",
                    UserAccessEditDeletion,
                ),
                mixed(
                    "Browser settings let you control cookies and opt out of tracking.",
                    DoNotTrack,
                ),
            ];
            S
        }
        UserAccessEditDeletion => {
            const S: &[Sentence] = &[
                plain("You can access and update your account information at any time."),
                plain("To delete your account please visit the account page."),
                plain("You may edit or correct inaccurate personal information."),
                plain("{c} allows you to request a copy of the information we hold."),
                plain("Users can delete content they have posted."),
                plain("You may request that we correct or delete your data."),
                mixed(
                    "After you delete your account we retain backups for a limited period.",
                    DataRetention,
                ),
                mixed(
                    "To access your information email our privacy team.",
                    PrivacyContactInformation,
                ),
            ];
            S
        }
        IntroductoryGeneric => {
            const S: &[Sentence] = &[
                plain("This privacy policy describes how {c} handles your information."),
                plain("Please read this policy carefully before using our services."),
                plain("This overview explains our practices in plain language."),
                plain("By using the site you agree to this privacy policy."),
                plain("Welcome to {c}, this introduction describes our approach to privacy."),
                plain("This document applies to all websites operated by {c}."),
                mixed(
                    "This policy describes how we collect and use personal information.",
                    FirstPartyCollectionUse,
                ),
                mixed(
                    "This privacy policy may be revised and we will notify you of changes.",
                    PolicyChange,
                ),
            ];
            S
        }
        PolicyChange => {
            const S: &[Sentence] = &[
                plain("We may update this policy from time to time."),
                plain("We will notify you of material changes by email."),
                plain("The revised policy takes effect when it is posted."),
                plain("Changes to this policy will be posted on this page."),
                plain("{c} reserves the right to modify these terms at any time."),
                plain("Please check back often to see any updates or changes."),
                mixed(
                    "If we change how we share data with third parties we will notify you.",
                    ThirdPartySharingCollection,
                ),
                mixed(
                    "We will post a revised version and ask for your consent if required.",
                    UserChoiceControl,
                ),
            ];
            S
        }
        DataSecurity => {
            const S: &[Sentence] = &[
                plain("We use encryption to protect your data in transit."),
                plain("{c} maintains physical and technical safeguards to secure information."),
                plain("Our servers are protected by firewalls and secure access controls."),
                plain("We take reasonable security measures to protect personal data."),
                plain("No method of transmission is completely secure."),
                plain("Access to data is limited to employees with security training."),
                mixed(
                    "We store your data on secure servers for as long as needed.",
                    DataRetention,
                ),
                mixed(
                    "Data about children receives additional security protection.",
                    InternationalSpecificAudience,
                ),
            ];
            S
        }
        InternationalSpecificAudience => {
            const S: &[Sentence] = &[
                plain("Our services are not directed to children under 13."),
                plain("California residents have additional rights under state law."),
                plain("European users may exercise rights under the GDPR."),
                plain("We do not knowingly collect information from children under 13."),
                plain("If you are a parent and believe your child used {c} please reach out."),
                plain("Users outside the United States consent to transfer of their data."),
                mixed(
                    "California residents may request that we delete their information.",
                    UserAccessEditDeletion,
                ),
                mixed(
                    "European users can contact our privacy officer with questions.",
                    PrivacyContactInformation,
                ),
            ];
            S
        }
        PracticeNotCovered => {
            const S: &[Sentence] = &[
                plain("Our site contains links to other websites not covered by this statement."),
                plain("{c} is not responsible for the practices of other services."),
                plain("Other practices not described here may apply in some regions."),
                plain("Some features are provided under separate terms."),
                plain("This statement does not cover information collected offline."),
                plain("Other products have their own notices."),
                mixed("Other sites may track you with their own cookies.", DoNotTrack),
                mixed(
                    "Practices of partners who receive shared data are not covered.",
                    ThirdPartySharingCollection,
                ),
            ];
            S
        }
        DataRetention => {
            const S: &[Sentence] = &[
                plain("We retain your information for as long as your account is active."),
                plain("Log data is deleted after a period of ninety days."),
                plain("We keep transaction records for seven years."),
                plain("{c} will store data only as long as necessary."),
                plain("Our retention period depends on the type of data."),
                plain("Deleted content may remain in backups for a short time."),
                mixed("We keep your data secure for the full retention period.", DataSecurity),
                mixed(
                    "We retain your email address until you ask us to remove it.",
                    PrivacyContactInformation,
                ),
            ];
            S
        }
        PrivacyContactInformation => {
            const S: &[Sentence] = &[
                plain("If you have questions please contact us by email."),
                plain("Contact us with any questions about this statement."),
                plain("You can reach our privacy officer by email or mail."),
                plain("Send questions to our data protection team at the address below."),
                plain("Our email address for privacy matters is listed on the contact page."),
                plain("{c} can be contacted by phone or postal mail."),
                mixed(
                    "Contact us to update or delete your account information.",
                    UserAccessEditDeletion,
                ),
                mixed(
                    "Contact us if you believe a child under 13 has provided information.",
                    InternationalSpecificAudience,
                ),
            ];
            S
        }
        DoNotTrack => {
            const S: &[Sentence] = &[
                plain("We do not respond to do not track signals."),
                plain("Your browser may offer a do not track setting."),
                plain("{c} does not currently honor browser track signals."),
                plain("There is no standard for responding to do not track requests."),
                plain("Some browsers send signals that we ignore."),
                plain("We track activity across sites regardless of browser signals."),
                mixed(
                    "You can adjust browser settings to control tracking and opt out.",
                    UserChoiceControl,
                ),
                mixed(
                    "Do not track signals do not change how third parties collect data.",
                    ThirdPartySharingCollection,
                ),
            ];
            S
        }
    }
}

/// Relative class frequencies, loosely following a real corpus where
/// collection and sharing dominate.
const WEIGHTS: [u32; 12] = [6, 5, 3, 2, 3, 2, 2, 2, 3, 2, 2, 1];

fn render(template: &str, company: &str) -> String {
    template.replace("{c}", company)
}

fn pick_label<R: Rng>(rng: &mut R, exclude: &BTreeSet<Label12>) -> Label12 {
    let total: u32 = Label12::ALL
        .iter()
        .filter(|l| !exclude.contains(l))
        .map(|l| WEIGHTS[l.index()])
        .sum();
    let mut x = rng.gen_range(0..total);
    for l in Label12::ALL {
        if exclude.contains(&l) {
            continue;
        }
        let w = WEIGHTS[l.index()];
        if x < w {
            return l;
        }
        x -= w;
    }
    unreachable!("weights cover the range")
}

/// A reason drawn from `sentence`: usually the whole sentence, sometimes a
/// window of at least four words, occasionally re-cased.
fn excerpt_of<R: Rng>(rng: &mut R, sentence: &str) -> String {
    let body = sentence.trim_end_matches('.');
    let words: Vec<&str> = body.split(' ').collect();
    let mut out = if words.len() > 5 && rng.gen_bool(0.3) {
        let len = rng.gen_range(4..words.len());
        let start = rng.gen_range(0..=words.len() - len);
        words[start..start + len].join(" ")
    } else {
        sentence.to_string()
    };
    if rng.gen_bool(0.1) {
        out = out.to_lowercase();
    }
    out
}

/// Stochastic rounding of a non-negative expectation.
fn draw_count<R: Rng>(rng: &mut R, expected: f64) -> usize {
    let base = expected.floor();
    base as usize + usize::from(rng.gen_bool((expected - base).clamp(0.0, 1.0)))
}

fn noisy_copy<R: Rng>(rng: &mut R, reason: &str, heavy: bool) -> String {
    let p = if heavy { 0.6 } else { 0.1 };
    text::words(reason)
        .into_iter()
        .map(|w| {
            if rng.gen_bool(p) {
                FILLER_WORDS.choose(rng).expect("non-empty").to_string()
            } else {
                w
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn wrong_label_text<R: Rng>(rng: &mut R, label: Label12) -> String {
    let plain: Vec<&Sentence> = sentences(label).iter().filter(|s| s.confusable.is_none()).collect();
    let s = plain.choose(rng).expect("every label has sentences");
    let words = text::words(&render(s.text, "the company"));
    words[..words.len().min(6)].join(" ")
}

struct Pair {
    label: Label12,
    reason: String,
    kind: PairKind,
}

#[derive(Clone, Copy, PartialEq)]
enum PairKind {
    Correct,
    Wrong,
    Hallucinated,
}

pub fn generate(config: &SyntheticConfig) -> SyntheticFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut paragraphs = Vec::with_capacity(config.paragraphs);
    let mut script = Vec::new();
    let mut seen_prompts: HashSet<String> = HashSet::new();
    let mut used_texts: HashSet<String> = HashSet::new();
    let mut stats = SyntheticStats::default();
    let policies = config.policies.clamp(1, COMPANIES.len()).min(config.paragraphs.max(1));

    for i in 0..config.paragraphs {
        let policy = i % policies;
        let company = COMPANIES[policy];
        let policy_id = format!("p{policy:02}");
        let paragraph_id = format!("{policy_id}_{:04}", i / policies);

        // redraw until the text is new, so prompts never collide
        let (paragraph, gold, parts) = loop {
            let n_labels = match rng.gen_range(0.0..1.0) {
                x if x < 0.55 => 1,
                x if x < 0.87 => 2,
                _ => 3,
            };
            let mut gold = BTreeSet::new();
            let mut parts: Vec<(Option<Label12>, String, Option<Label12>)> = Vec::new();
            while gold.len() < n_labels {
                let l = pick_label(&mut rng, &gold);
                gold.insert(l);
                let pool = sentences(l);
                let s = if rng.gen_bool(0.3) {
                    &pool[6 + rng.gen_range(0..2)]
                } else {
                    &pool[rng.gen_range(0..6)]
                };
                parts.push((Some(l), render(s.text, company), s.confusable));
            }
            if rng.gen_bool(0.3) {
                let n = NEUTRAL.choose(&mut rng).expect("non-empty");
                let at = rng.gen_range(0..=parts.len());
                parts.insert(at, (None, render(n, company), None));
            }

            let mut text = String::new();
            let mut spans = Vec::new();
            for (label, sentence, _) in &parts {
                if !text.is_empty() {
                    text.push(' ');
                }
                let start = text::char_len(&text);
                text.push_str(sentence);
                if let Some(l) = label {
                    spans.push((*l, start, text::char_len(&text)));
                }
            }
            if used_texts.insert(text.clone()) {
                let paragraph =
                    Paragraph::new(&policy_id, &paragraph_id, &text, spans).expect("generated spans are valid");
                break (paragraph, gold, parts);
            }
        };

        // scripted classifier
        let gold_parts: Vec<&(Option<Label12>, String, Option<Label12>)> =
            parts.iter().filter(|p| p.0.is_some()).collect();
        let mut pairs = Vec::new();
        for (label, sentence, _) in &gold_parts {
            if rng.gen_bool(config.recall) {
                pairs.push(Pair {
                    label: label.expect("gold part"),
                    reason: excerpt_of(&mut rng, sentence),
                    kind: PairKind::Correct,
                });
            }
        }
        let correct = pairs.len();
        let wrong = if config.wrong_label_rate >= 1.0 {
            gold_parts.len()
        } else {
            let r = config.wrong_label_rate;
            draw_count(&mut rng, correct.max(1) as f64 * r / (1.0 - r))
        };
        let wrong = if gold.len() == Label12::COUNT { 0 } else { wrong };
        for _ in 0..wrong {
            let (_, sentence, confusable) = gold_parts.choose(&mut rng).expect("at least one gold part");
            let label = match confusable {
                Some(c) if !gold.contains(c) && rng.gen_bool(0.6) => *c,
                _ => pick_label(&mut rng, &gold),
            };
            pairs.push(Pair {
                label,
                reason: excerpt_of(&mut rng, sentence),
                kind: PairKind::Wrong,
            });
        }
        let h = config.hallucination_rate.clamp(0.0, 0.95);
        let hallucinated = draw_count(&mut rng, pairs.len() as f64 * h / (1.0 - h));
        for _ in 0..hallucinated {
            let label = Label12::ALL[rng.gen_range(0..Label12::COUNT)];
            let reason = loop {
                let source = Label12::ALL[rng.gen_range(0..Label12::COUNT)];
                let s = sentences(source).choose(&mut rng).expect("non-empty");
                let other = COMPANIES[(policy + 1 + rng.gen_range(0..policies.max(2) - 1)) % COMPANIES.len()];
                let candidate = render(s.text, other);
                if text::find_normalized(&paragraph.text, &candidate).is_none() {
                    break candidate;
                }
            };
            pairs.push(Pair {
                label,
                reason,
                kind: PairKind::Hallucinated,
            });
        }
        pairs.shuffle(&mut rng);
        for p in &pairs {
            match p.kind {
                PairKind::Correct => stats.correct_pairs += 1,
                PairKind::Wrong => stats.wrong_label_pairs += 1,
                PairKind::Hallucinated => stats.hallucinated_pairs += 1,
            }
        }

        let mut lines: Vec<String> = pairs
            .iter()
            .map(|p| render_classifier_line(p.label, &p.reason))
            .collect();
        if rng.gen_bool(0.1) {
            lines.insert(0, "Here are the categories I found:".to_string());
            stats.noise_lines += 1;
        }
        if rng.gen_bool(0.05) {
            lines.push("Label: Marketing | Reason: \"we send newsletters\"".to_string());
            stats.noise_lines += 1;
        }
        let completion = lines.join("\n");
        script.push(MockEntry::for_prompt(
            Role::ExplainedClassifier,
            &build_classifier_prompt(&paragraph),
            &completion,
        ));

        // scripted filler, driven by what the real parser and filter keep
        let (kept, _) = hallucination_filter(&paragraph, parse_classifier_output(&completion).pairs);
        for k in kept {
            let masked = mask_reason(&paragraph.text, k.span).expect("kept spans are valid");
            let prompt = build_filler_prompt(&masked, k.label).expect("one mask token");
            if !seen_prompts.insert(prompt.clone()) {
                continue;
            }
            let body = if gold.contains(&k.label) {
                let heavy = rng.gen_bool(config.heavy_noise_rate);
                noisy_copy(&mut rng, &k.excerpt, heavy)
            } else if rng.gen_bool(config.echo_rate) {
                noisy_copy(&mut rng, &k.excerpt, false)
            } else {
                wrong_label_text(&mut rng, k.label)
            };
            let fill = match rng.gen_range(0..10) {
                0 | 1 => format!("\"{body}\""),
                2 => format!("{body}\nThis text describes the masked practice."),
                _ => body,
            };
            stats.filler_prompts += 1;
            script.push(MockEntry::for_prompt(Role::BlankFiller, &prompt, fill));
        }
        paragraphs.push(paragraph);
    }

    let test = config.test_policies.min(policies);
    let split = split_by_policy(&paragraphs, config.seed, policies - test, test).expect("counts match the policies");
    SyntheticFixture {
        paragraphs,
        split,
        script,
        stats,
    }
}
