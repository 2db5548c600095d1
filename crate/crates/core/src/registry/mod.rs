//! Registry access: the project index, per-package metadata documents and
//! source archives, from a live endpoint or an offline fixture tree.

mod cache;
mod client;
mod model;
mod name;
mod rate_limit;
mod transport;

use std::path::PathBuf;

pub use cache::Cache;
pub use client::{
    parse_index, verify_integrity, Endpoint, MetadataOutcome, RegistryClient, RegistrySource,
    RetryPolicy, DEFAULT_REPO_RAW_BASE, DEFAULT_USER_AGENT,
};
pub use model::{
    parse_metadata_document, parse_timestamp, DistFile, PackageRecord, PackageType, ReleaseRecord,
};
pub use name::normalize_package_name;
pub use rate_limit::RateLimiter;
pub use transport::{
    Fetched, FixtureTransport, HttpTransport, Resource, Transport, TransportError,
};

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("invalid package name {0:?}")]
    InvalidName(String),
    #[error("fetch failed for {url}: {reason}")]
    Fetch { url: String, reason: String },
    #[error("could not parse {what}: {reason}")]
    Parse { what: String, reason: String },
    #[error("integrity check failed for {filename}: {reason}")]
    Integrity { filename: String, reason: String },
    #[error("{0} is not a source distribution")]
    NotSdist(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cache: {0}")]
    Cache(String),
    #[error("registry configuration: {0}")]
    Config(String),
}
