use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::cache::Cache;
use super::model::{parse_metadata_document, DistFile, PackageRecord, PackageType};
use super::rate_limit::RateLimiter;
use super::transport::{
    Fetched, FixtureTransport, HttpTransport, Resource, Transport, TransportError,
};
use super::RegistryError;

pub const DEFAULT_USER_AGENT: &str = concat!("pypi-census/", env!("CARGO_PKG_VERSION"));
pub const DEFAULT_REPO_RAW_BASE: &str = "https://raw.githubusercontent.com";

#[derive(Debug, Clone, PartialEq)]
pub enum Endpoint {
    Live { base_url: String },
    Fixture { root: PathBuf },
}

/// Where registry data comes from and how it is fetched.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrySource {
    pub endpoint: Endpoint,
    pub cache_dir: PathBuf,
    /// Requests per second; must be positive in live mode.
    pub rate_limit: f64,
    pub user_agent: String,
    /// Base for raw code-host file URLs (license files).
    pub repo_raw_base: String,
}

impl RegistrySource {
    pub fn fixture(root: impl Into<PathBuf>, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            endpoint: Endpoint::Fixture { root: root.into() },
            cache_dir: cache_dir.into(),
            rate_limit: f64::INFINITY,
            user_agent: DEFAULT_USER_AGENT.to_string(),
            repo_raw_base: DEFAULT_REPO_RAW_BASE.to_string(),
        }
    }

    pub fn live(
        base_url: impl Into<String>,
        cache_dir: impl Into<PathBuf>,
        rate_limit: f64,
    ) -> Self {
        Self {
            endpoint: Endpoint::Live {
                base_url: base_url.into(),
            },
            cache_dir: cache_dir.into(),
            rate_limit,
            user_agent: DEFAULT_USER_AGENT.to_string(),
            repo_raw_base: DEFAULT_REPO_RAW_BASE.to_string(),
        }
    }

    pub fn is_live(&self) -> bool {
        matches!(self.endpoint, Endpoint::Live { .. })
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        match &self.endpoint {
            Endpoint::Live { base_url } => {
                if !(base_url.starts_with("http://") || base_url.starts_with("https://")) {
                    return Err(RegistryError::Config(format!(
                        "base url must be http(s): {base_url:?}"
                    )));
                }
                if !(self.rate_limit.is_finite() && self.rate_limit > 0.0) {
                    return Err(RegistryError::Config(format!(
                        "rate limit must be a positive number, got {}",
                        self.rate_limit
                    )));
                }
            }
            Endpoint::Fixture { root } => {
                if !root.is_dir() {
                    return Err(RegistryError::Config(format!(
                        "fixture root {} is not a directory",
                        root.display()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Retry schedule for transient failures: `retries` extra attempts after the
/// first, sleeping `base_delay * 2^i` before retry `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn delay_before_retry(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetadataOutcome {
    Found(PackageRecord),
    /// The registry no longer serves this package.
    Gone,
}

pub struct RegistryClient {
    source: RegistrySource,
    transport: Box<dyn Transport>,
    cache: Cache,
    limiter: Option<Arc<RateLimiter>>,
    retry: RetryPolicy,
    transport_calls: AtomicU64,
}

impl RegistryClient {
    pub fn new(source: RegistrySource) -> Result<Self, RegistryError> {
        source.validate()?;
        let transport: Box<dyn Transport> = match &source.endpoint {
            Endpoint::Live { base_url } => Box::new(HttpTransport::new(
                base_url,
                &source.repo_raw_base,
                &source.user_agent,
            )),
            Endpoint::Fixture { root } => Box::new(FixtureTransport::new(root)),
        };
        Ok(Self::with_transport(source, transport))
    }

    pub fn with_transport(source: RegistrySource, transport: Box<dyn Transport>) -> Self {
        let limiter = (source.rate_limit.is_finite() && source.rate_limit > 0.0)
            .then(|| Arc::new(RateLimiter::new(source.rate_limit)));
        Self {
            cache: Cache::new(&source.cache_dir),
            source,
            transport,
            limiter,
            retry: RetryPolicy::default(),
            transport_calls: AtomicU64::new(0),
        }
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn source(&self) -> &RegistrySource {
        &self.source
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    /// Number of requests that reached the transport (cache misses plus retries).
    pub fn transport_calls(&self) -> u64 {
        self.transport_calls.load(Ordering::Relaxed)
    }

    fn get_with_retry(&self, resource: Resource<'_>) -> Result<Fetched, RegistryError> {
        let mut attempt = 0;
        loop {
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            self.transport_calls.fetch_add(1, Ordering::Relaxed);
            match self.transport.get(resource) {
                Ok(f) => return Ok(f),
                Err(TransportError::Transient(reason)) if attempt < self.retry.retries => {
                    let delay = self.retry.delay_before_retry(attempt);
                    tracing::warn!(%reason, ?delay, "transient fetch failure, retrying");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => {
                    return Err(RegistryError::Fetch {
                        url: self.transport.describe(resource),
                        reason: e.to_string(),
                    })
                }
            }
        }
    }

    fn fetch_required(&self, resource: Resource<'_>) -> Result<Vec<u8>, RegistryError> {
        match self.get_with_retry(resource)? {
            Fetched::Body(b) => Ok(b),
            Fetched::NotFound => Err(RegistryError::Fetch {
                url: self.transport.describe(resource),
                reason: "not found".into(),
            }),
        }
    }

    /// Every project name listed by the registry index, in listed order.
    pub fn fetch_package_index(&self) -> Result<Vec<String>, RegistryError> {
        let (path, _) = self
            .cache
            .get_or_fetch("simple/index", || self.fetch_required(Resource::Index))?;
        let body = std::fs::read(&path).map_err(|e| RegistryError::Io { path, source: e })?;
        parse_index(&body)
    }

    pub fn fetch_package_metadata(&self, name: &str) -> Result<MetadataOutcome, RegistryError> {
        let key = format!("json/{name}.json");
        if let Some(body) = self.cache.read(&key)? {
            return parse_metadata_document(name, &body).map(MetadataOutcome::Found);
        }
        match self.get_with_retry(Resource::Metadata(name))? {
            Fetched::NotFound => Ok(MetadataOutcome::Gone),
            Fetched::Body(body) => {
                // Validate before caching so a bad document is refetched next run.
                let record = parse_metadata_document(name, &body)?;
                self.cache.write(&key, &body)?;
                Ok(MetadataOutcome::Found(record))
            }
        }
    }

    /// Downloads a source archive into the cache, verifying size and digest.
    pub fn fetch_sdist(&self, file: &DistFile) -> Result<PathBuf, RegistryError> {
        if file.package_type != PackageType::Sdist {
            return Err(RegistryError::NotSdist(file.filename.clone()));
        }
        if file.filename.contains('/') || file.filename.contains('\\') {
            return Err(RegistryError::Cache(format!(
                "unsafe filename {:?}",
                file.filename
            )));
        }
        let key = format!("files/{}", file.filename);
        let (path, _) = self.cache.get_or_fetch(&key, || {
            let body = self.fetch_required(Resource::File {
                filename: &file.filename,
                url: &file.url,
            })?;
            verify_integrity(file, &body)?;
            Ok(body)
        })?;
        Ok(path)
    }

    /// Fetches one file from a code-host repository; `None` when absent.
    pub fn fetch_repo_file(
        &self,
        owner: &str,
        repo: &str,
        path: &str,
    ) -> Result<Option<Vec<u8>>, RegistryError> {
        let key = format!("repos/{owner}/{repo}/{path}");
        if let Some(body) = self.cache.read(&key)? {
            return Ok(Some(body));
        }
        match self.get_with_retry(Resource::RepoFile { owner, repo, path })? {
            Fetched::NotFound => Ok(None),
            Fetched::Body(body) => {
                self.cache.write(&key, &body)?;
                Ok(Some(body))
            }
        }
    }
}

pub fn verify_integrity(file: &DistFile, body: &[u8]) -> Result<(), RegistryError> {
    if file.size_bytes != body.len() as u64 {
        return Err(RegistryError::Integrity {
            filename: file.filename.clone(),
            reason: format!(
                "expected {} bytes, received {}",
                file.size_bytes,
                body.len()
            ),
        });
    }
    if let Some(expected) = &file.sha256 {
        let actual = hex::encode(Sha256::digest(body));
        if !actual.eq_ignore_ascii_case(expected) {
            return Err(RegistryError::Integrity {
                filename: file.filename.clone(),
                reason: format!("sha256 {actual} does not match {expected}"),
            });
        }
    }
    Ok(())
}

/// Accepts the JSON simple API (`{"projects": [{"name": ..}]}`) or the HTML
/// anchor list. A blank document is an empty index.
pub fn parse_index(body: &[u8]) -> Result<Vec<String>, RegistryError> {
    let text = std::str::from_utf8(body).map_err(|e| RegistryError::Parse {
        what: "package index".into(),
        reason: e.to_string(),
    })?;
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if trimmed.starts_with('{') {
        #[derive(serde::Deserialize)]
        struct Project {
            name: String,
        }
        #[derive(serde::Deserialize)]
        struct Index {
            projects: Vec<Project>,
        }
        let index: Index = serde_json::from_str(trimmed).map_err(|e| RegistryError::Parse {
            what: "package index".into(),
            reason: e.to_string(),
        })?;
        return Ok(index.projects.into_iter().map(|p| p.name).collect());
    }
    if trimmed.starts_with('<') {
        let anchor = regex::Regex::new(r"(?s)<a\b[^>]*>(.*?)</a>").expect("static regex");
        return Ok(anchor
            .captures_iter(trimmed)
            .map(|c| c[1].trim().to_string())
            .filter(|s| !s.is_empty())
            .collect());
    }
    Err(RegistryError::Parse {
        what: "package index".into(),
        reason: "neither JSON nor HTML".into(),
    })
}
