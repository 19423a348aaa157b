use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// The twelve paragraph categories: the ten OPP-115 data practices with
/// `Other` split into its three attribute values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label12 {
    FirstPartyCollectionUse,
    ThirdPartySharingCollection,
    UserChoiceControl,
    UserAccessEditDeletion,
    IntroductoryGeneric,
    PolicyChange,
    DataSecurity,
    InternationalSpecificAudience,
    PracticeNotCovered,
    DataRetention,
    PrivacyContactInformation,
    DoNotTrack,
}

impl Label12 {
    pub const COUNT: usize = 12;

    pub const ALL: [Label12; 12] = [
        Label12::FirstPartyCollectionUse,
        Label12::ThirdPartySharingCollection,
        Label12::UserChoiceControl,
        Label12::UserAccessEditDeletion,
        Label12::IntroductoryGeneric,
        Label12::PolicyChange,
        Label12::DataSecurity,
        Label12::InternationalSpecificAudience,
        Label12::PracticeNotCovered,
        Label12::DataRetention,
        Label12::PrivacyContactInformation,
        Label12::DoNotTrack,
    ];

    /// Canonical display name, as used in reports and on the wire.
    pub fn name(self) -> &'static str {
        match self {
            Label12::FirstPartyCollectionUse => "First Party Collection/Use",
            Label12::ThirdPartySharingCollection => "Third Party Sharing/Collection",
            Label12::UserChoiceControl => "User Choice/Control",
            Label12::UserAccessEditDeletion => "User Access, Edit and Deletion",
            Label12::IntroductoryGeneric => "Introductory/Generic",
            Label12::PolicyChange => "Policy Change",
            Label12::DataSecurity => "Data Security",
            Label12::InternationalSpecificAudience => "International & Specific Audience",
            Label12::PracticeNotCovered => "Practice Not Covered",
            Label12::DataRetention => "Data Retention",
            Label12::PrivacyContactInformation => "Privacy Contact Information",
            Label12::DoNotTrack => "Do Not Track",
        }
    }

    fn ident(self) -> &'static str {
        match self {
            Label12::FirstPartyCollectionUse => "FirstPartyCollectionUse",
            Label12::ThirdPartySharingCollection => "ThirdPartySharingCollection",
            Label12::UserChoiceControl => "UserChoiceControl",
            Label12::UserAccessEditDeletion => "UserAccessEditDeletion",
            Label12::IntroductoryGeneric => "IntroductoryGeneric",
            Label12::PolicyChange => "PolicyChange",
            Label12::DataSecurity => "DataSecurity",
            Label12::InternationalSpecificAudience => "InternationalSpecificAudience",
            Label12::PracticeNotCovered => "PracticeNotCovered",
            Label12::DataRetention => "DataRetention",
            Label12::PrivacyContactInformation => "PrivacyContactInformation",
            Label12::DoNotTrack => "DoNotTrack",
        }
    }

    /// Position in [`Label12::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// Short keyword description of the category. Used as the comparison text
    /// when a verifier has to judge a reason without a regenerated excerpt.
    pub fn gloss(self) -> &'static str {
        match self {
            Label12::FirstPartyCollectionUse => "we collect use personal information data first party",
            Label12::ThirdPartySharingCollection => "share disclose third parties partners advertisers data",
            Label12::UserChoiceControl => "choice control opt out consent preferences settings",
            Label12::UserAccessEditDeletion => "access edit delete update correct account information",
            Label12::IntroductoryGeneric => "this privacy policy describes introduction overview",
            Label12::PolicyChange => "changes to this policy notify update revised",
            Label12::DataSecurity => "security protect secure encryption safeguards data",
            Label12::InternationalSpecificAudience => "children under 13 california residents european users",
            Label12::PracticeNotCovered => "practice not covered other",
            Label12::DataRetention => "retain retention keep store period deleted",
            Label12::PrivacyContactInformation => "contact us questions email address privacy",
            Label12::DoNotTrack => "do not track signals browser",
        }
    }

    /// Lenient lookup accepting the display name, the identifier, and the
    /// OPP-115 spellings, compared case-insensitively on alphanumerics only.
    pub fn parse_lenient(s: &str) -> Option<Label12> {
        let key = squash(s);
        if key.is_empty() {
            return None;
        }
        Label12::ALL
            .into_iter()
            .find(|l| squash(l.name()) == key || squash(l.ident()) == key)
            .or(match key.as_str() {
                "internationalandspecificaudiences"
                | "internationalandspecificaudience"
                | "internationalspecificaudiences" => Some(Label12::InternationalSpecificAudience),
                "useraccesseditanddeletion" => Some(Label12::UserAccessEditDeletion),
                "dnt" => Some(Label12::DoNotTrack),
                _ => None,
            })
    }
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

impl fmt::Display for Label12 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for Label12 {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label12::parse_lenient(s).ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

impl Serialize for Label12 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Label12 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
