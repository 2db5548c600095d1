//! License normalization and the per-package resolution cascade:
//! metadata field, then a LICENSE file from the linked repository, then
//! trove classifiers, then Unknown.

mod resolve;
mod rules;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use resolve::{
    fetch_license_file, parse_repository_url, resolve_from_classifiers, resolve_from_license_file,
    resolve_package_license, LicenseFileSource, DEFAULT_LICENSE_FILES,
};
pub use rules::{fold, normalize_url, LicenseRuleError, LicenseRuleSet, DEFAULT_RULES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LicenseFamily {
    MIT,
    BSD,
    Apache,
    GPL,
    LGPL,
    AGPL,
    MPL,
    ISC,
    PSFL,
    Zope,
    CC,
    CeCILL,
    Zlib,
    PublicDomain,
    Proprietary,
    Unknown,
}

impl LicenseFamily {
    pub const ALL: [LicenseFamily; 16] = [
        Self::MIT,
        Self::BSD,
        Self::Apache,
        Self::GPL,
        Self::LGPL,
        Self::AGPL,
        Self::MPL,
        Self::ISC,
        Self::PSFL,
        Self::Zope,
        Self::CC,
        Self::CeCILL,
        Self::Zlib,
        Self::PublicDomain,
        Self::Proprietary,
        Self::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MIT => "MIT",
            Self::BSD => "BSD",
            Self::Apache => "Apache",
            Self::GPL => "GPL",
            Self::LGPL => "LGPL",
            Self::AGPL => "AGPL",
            Self::MPL => "MPL",
            Self::ISC => "ISC",
            Self::PSFL => "PSFL",
            Self::Zope => "Zope",
            Self::CC => "CC",
            Self::CeCILL => "CeCILL",
            Self::Zlib => "zlib",
            Self::PublicDomain => "Public Domain",
            Self::Proprietary => "Proprietary",
            Self::Unknown => "Unknown",
        }
    }

    /// Accepts the display label or the rule-file spelling (`PublicDomain`).
    pub fn parse(value: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.as_str() == value || format!("{f:?}") == value)
    }

    pub fn is_gpl_family(self) -> bool {
        matches!(self, Self::GPL | Self::LGPL | Self::AGPL)
    }

    /// Family label for the family-level report, where the GPL variants
    /// share one row.
    pub fn report_label(self) -> &'static str {
        if self.is_gpl_family() {
            "GPL"
        } else {
            self.as_str()
        }
    }
}

impl fmt::Display for LicenseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LicenseVersion {
    /// The license has no versions (MIT, ISC, ...).
    NotApplicable,
    Unknown,
    Version(String),
}

impl LicenseVersion {
    pub fn parse(value: &str) -> Self {
        match value {
            "n/a" => Self::NotApplicable,
            "unknown" | "Unknown" | "" => Self::Unknown,
            v => Self::Version(v.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Self::NotApplicable => "n/a",
            Self::Unknown => "Unknown",
            Self::Version(v) => v,
        }
    }
}

impl fmt::Display for LicenseVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LicenseSource {
    MetadataField,
    LicenseFile,
    Classifier,
    Unknown,
}

impl LicenseSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MetadataField => "metadata_field",
            Self::LicenseFile => "license_file",
            Self::Classifier => "classifier",
            Self::Unknown => "unknown",
        }
    }

    pub fn parse(value: &str) -> Option<Self> {
        [
            Self::MetadataField,
            Self::LicenseFile,
            Self::Classifier,
            Self::Unknown,
        ]
        .into_iter()
        .find(|s| s.as_str() == value)
    }
}

/// Normalized (family, name, version) triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LicenseId {
    pub family: LicenseFamily,
    pub name: String,
    pub version: LicenseVersion,
}

impl LicenseId {
    pub fn new(family: LicenseFamily, name: &str, version: LicenseVersion) -> Self {
        Self {
            family,
            name: name.to_string(),
            version,
        }
    }

    /// Display string that the rule set maps back to this id.
    pub fn canonical_string(&self) -> String {
        match &self.version {
            LicenseVersion::Version(v) => format!("{} {v}", self.name),
            _ => self.name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LicenseAssignment {
    pub family: LicenseFamily,
    pub name: String,
    pub version: LicenseVersion,
    pub source: LicenseSource,
    /// Set when several license classifiers disagree; the family is then
    /// Unknown while the source stays `classifier`.
    pub ambiguous: bool,
}

impl LicenseAssignment {
    pub fn from_id(id: LicenseId, source: LicenseSource) -> Self {
        Self {
            family: id.family,
            name: id.name,
            version: id.version,
            source,
            ambiguous: false,
        }
    }

    pub fn unknown() -> Self {
        Self {
            family: LicenseFamily::Unknown,
            name: "Unknown".into(),
            version: LicenseVersion::Unknown,
            source: LicenseSource::Unknown,
            ambiguous: false,
        }
    }

    pub fn ambiguous_classifiers() -> Self {
        Self {
            source: LicenseSource::Classifier,
            ambiguous: true,
            ..Self::unknown()
        }
    }

    pub fn id(&self) -> LicenseId {
        LicenseId::new(self.family, &self.name, self.version.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_labels_round_trip() {
        for f in LicenseFamily::ALL {
            assert_eq!(LicenseFamily::parse(f.as_str()), Some(f));
        }
        assert_eq!(
            LicenseFamily::parse("PublicDomain"),
            Some(LicenseFamily::PublicDomain)
        );
        assert_eq!(LicenseFamily::parse("Zlib"), Some(LicenseFamily::Zlib));
        assert_eq!(LicenseFamily::parse("GPLv3"), None);
    }

    #[test]
    fn report_label_folds_gpl_variants() {
        assert_eq!(LicenseFamily::AGPL.report_label(), "GPL");
        assert_eq!(LicenseFamily::LGPL.report_label(), "GPL");
        assert_eq!(LicenseFamily::MIT.report_label(), "MIT");
    }

    #[test]
    fn canonical_strings() {
        let bsd = LicenseId::new(LicenseFamily::BSD, "BSD", LicenseVersion::parse("3-Clause"));
        assert_eq!(bsd.canonical_string(), "BSD 3-Clause");
        let mit = LicenseId::new(LicenseFamily::MIT, "MIT", LicenseVersion::parse("n/a"));
        assert_eq!(mit.canonical_string(), "MIT");
    }
}
