use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{normalize_package_name, RegistryError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackageType {
    Sdist,
    BdistWheel,
    BdistEgg,
    Other,
}

impl PackageType {
    pub fn from_registry(value: &str) -> Self {
        match value {
            "sdist" => Self::Sdist,
            "bdist_wheel" => Self::BdistWheel,
            "bdist_egg" => Self::BdistEgg,
            _ => Self::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sdist => "sdist",
            Self::BdistWheel => "bdist_wheel",
            Self::BdistEgg => "bdist_egg",
            Self::Other => "other",
        }
    }
}

/// One distribution file attached to a release.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistFile {
    pub filename: String,
    pub package_type: PackageType,
    pub size_bytes: u64,
    pub upload_time: DateTime<Utc>,
    pub url: String,
    /// Hex SHA-256 digest as reported by the registry, when present.
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseRecord {
    pub version: String,
    pub files: Vec<DistFile>,
    /// Earliest file upload time; `None` for releases without files.
    pub upload_time: Option<DateTime<Utc>>,
}

impl ReleaseRecord {
    pub fn new(version: impl Into<String>, files: Vec<DistFile>) -> Self {
        let upload_time = files.iter().map(|f| f.upload_time).min();
        Self {
            version: version.into(),
            files,
            upload_time,
        }
    }

    pub fn size_bytes(&self) -> u64 {
        self.files.iter().map(|f| f.size_bytes).sum()
    }

    pub fn sdists(&self) -> impl Iterator<Item = &DistFile> {
        self.files
            .iter()
            .filter(|f| f.package_type == PackageType::Sdist)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageRecord {
    pub name: String,
    pub raw_name: String,
    pub author: Option<String>,
    pub maintainer: Option<String>,
    pub home_page: Option<String>,
    pub license_field: Option<String>,
    pub classifiers: Vec<String>,
    pub releases: Vec<ReleaseRecord>,
}

impl PackageRecord {
    /// Orders releases by upload time; releases without files sort last, and
    /// ties keep their incoming order.
    pub fn sort_releases(&mut self) {
        self.releases
            .sort_by_key(|r| (r.upload_time.is_none(), r.upload_time));
    }

    pub fn first_upload(&self) -> Option<DateTime<Utc>> {
        self.releases.iter().filter_map(|r| r.upload_time).min()
    }
}

#[derive(Deserialize)]
struct MetadataDocument {
    info: InfoBlock,
    #[serde(default)]
    releases: serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct InfoBlock {
    name: Option<String>,
    author: Option<String>,
    maintainer: Option<String>,
    home_page: Option<String>,
    license: Option<String>,
    #[serde(default)]
    classifiers: Vec<String>,
}

#[derive(Deserialize)]
struct FileBlock {
    filename: String,
    #[serde(default)]
    packagetype: String,
    #[serde(default)]
    size: u64,
    upload_time: Option<String>,
    upload_time_iso_8601: Option<String>,
    #[serde(default)]
    url: String,
    #[serde(default)]
    digests: Option<Digests>,
}

#[derive(Deserialize)]
struct Digests {
    sha256: Option<String>,
}

fn non_empty(value: Option<String>) -> Option<String> {
    value.filter(|s| !s.trim().is_empty())
}

/// Registry timestamps come either as RFC 3339 or as naive UTC
/// (`2016-05-03T12:00:00`, optionally with fractional seconds).
pub fn parse_timestamp(value: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(value) {
        return Some(t.with_timezone(&Utc));
    }
    [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
    ]
    .iter()
    .find_map(|fmt| NaiveDateTime::parse_from_str(value, fmt).ok())
    .map(|n| n.and_utc())
}

/// Parses a `/pypi/<name>/json` document into a [`PackageRecord`].
pub fn parse_metadata_document(
    requested_name: &str,
    body: &[u8],
) -> Result<PackageRecord, RegistryError> {
    let parse_err = |reason: String| RegistryError::Parse {
        what: format!("metadata for {requested_name}"),
        reason,
    };
    let doc: MetadataDocument =
        serde_json::from_slice(body).map_err(|e| parse_err(e.to_string()))?;

    let raw_name = non_empty(doc.info.name).unwrap_or_else(|| requested_name.to_string());
    let name = normalize_package_name(&raw_name)?;

    let mut releases = Vec::with_capacity(doc.releases.len());
    for (version, files) in doc.releases {
        let files: Vec<FileBlock> = serde_json::from_value(files)
            .map_err(|e| parse_err(format!("release {version}: {e}")))?;
        let mut dist_files = Vec::with_capacity(files.len());
        for f in files {
            let stamp = f
                .upload_time_iso_8601
                .as_deref()
                .or(f.upload_time.as_deref())
                .ok_or_else(|| parse_err(format!("{}: missing upload_time", f.filename)))?;
            let upload_time = parse_timestamp(stamp)
                .ok_or_else(|| parse_err(format!("{}: bad upload_time {stamp:?}", f.filename)))?;
            dist_files.push(DistFile {
                package_type: PackageType::from_registry(&f.packagetype),
                size_bytes: f.size,
                upload_time,
                url: f.url,
                sha256: f.digests.and_then(|d| d.sha256).filter(|s| !s.is_empty()),
                filename: f.filename,
            });
        }
        releases.push(ReleaseRecord::new(version, dist_files));
    }

    let mut record = PackageRecord {
        name,
        raw_name,
        author: non_empty(doc.info.author),
        maintainer: non_empty(doc.info.maintainer),
        home_page: non_empty(doc.info.home_page),
        license_field: non_empty(doc.info.license),
        classifiers: doc.info.classifiers,
        releases,
    };
    record.sort_releases();
    Ok(record)
}
