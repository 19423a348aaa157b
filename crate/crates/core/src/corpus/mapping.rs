use std::io::Read;
use std::path::Path;

use super::{CorpusError, Label12};

/// The ten first-tier OPP-115 data practices.
pub const OPP115_PRACTICES: [&str; 10] = [
    "First Party Collection/Use",
    "Third Party Sharing/Collection",
    "User Choice/Control",
    "User Access, Edit and Deletion",
    "Data Retention",
    "Data Security",
    "Policy Change",
    "Do Not Track",
    "International and Specific Audiences",
    "Other",
];

const DEFAULT_MAPPING: &str = include_str!("../../data/tier_mapping.csv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingRule {
    pub practice: String,
    /// `None` matches any attribute.
    pub attribute: Option<String>,
    pub label: Label12,
}

/// Maps (data practice, data attribute) pairs onto [`Label12`].
///
/// Attribute-specific rules win over wildcard rules for the same practice.
/// Keys compare case-insensitively with whitespace collapsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierMapping {
    rules: Vec<MappingRule>,
}

fn key(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl TierMapping {
    pub fn new(rules: Vec<MappingRule>) -> Self {
        TierMapping { rules }
    }

    pub fn rules(&self) -> &[MappingRule] {
        &self.rules
    }

    /// Reads the `data_practice,data_attribute,label12` CSV form.
    pub fn from_csv_reader<R: Read>(reader: R, origin: &Path) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| CorpusError::malformed(origin, Some(1), e.to_string()))?
            .clone();
        let expected = ["data_practice", "data_attribute", "label12"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(CorpusError::malformed(
                origin,
                Some(1),
                format!("expected header `{}`", expected.join(",")),
            ));
        }
        let mut rules = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| {
                let line = e.position().map(|p| p.line());
                CorpusError::malformed(origin, line, e.to_string())
            })?;
            let line = row.position().map(|p| p.line());
            if row.len() != 3 {
                return Err(CorpusError::malformed(origin, line, "expected 3 fields"));
            }
            let practice = row[0].to_string();
            if practice.is_empty() {
                return Err(CorpusError::malformed(origin, line, "empty data_practice"));
            }
            let attribute = (!row[1].is_empty()).then(|| row[1].to_string());
            let label = row[2]
                .parse::<Label12>()
                .map_err(|e| CorpusError::malformed(origin, line, e.to_string()))?;
            rules.push(MappingRule {
                practice,
                attribute,
                label,
            });
        }
        Ok(TierMapping { rules })
    }

    pub fn from_csv_file(path: &Path) -> Result<Self, CorpusError> {
        let f = std::fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
        Self::from_csv_reader(f, path)
    }

    /// Practices from `practices` that no rule covers.
    pub fn missing_practices<'a>(&self, practices: &[&'a str]) -> Vec<&'a str> {
        practices
            .iter()
            .copied()
            .filter(|p| !self.rules.iter().any(|r| key(&r.practice) == key(p)))
            .collect()
    }

    /// Resolves a practice given the attribute names/values seen on the
    /// annotation. An attribute rule matches when any given string equals it.
    pub fn resolve<'a>(
        &self,
        practice: &str,
        attributes: impl IntoIterator<Item = &'a str> + Clone,
    ) -> Option<Label12> {
        let pk = key(practice);
        let specific = self.rules.iter().filter(|r| key(&r.practice) == pk);
        for rule in specific.clone() {
            if let Some(attr) = &rule.attribute {
                let ak = key(attr);
                if attributes.clone().into_iter().any(|a| key(a) == ak) {
                    return Some(rule.label);
                }
            }
        }
        specific.filter(|r| r.attribute.is_none()).map(|r| r.label).next()
    }
}

impl Default for TierMapping {
    fn default() -> Self {
        TierMapping::from_csv_reader(DEFAULT_MAPPING.as_bytes(), Path::new("<builtin tier_mapping.csv>"))
            .expect("builtin tier mapping parses")
    }
}
