use std::io::Read;
use std::path::PathBuf;
use std::time::Duration;

/// What a fetch is asking for; transports map this onto their own layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resource<'a> {
    Index,
    Metadata(&'a str),
    File {
        filename: &'a str,
        url: &'a str,
    },
    RepoFile {
        owner: &'a str,
        repo: &'a str,
        path: &'a str,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fetched {
    Body(Vec<u8>),
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    /// Worth retrying: connection failures, 429, 5xx.
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Permanent(String),
}

pub trait Transport: Send + Sync {
    fn get(&self, resource: Resource<'_>) -> Result<Fetched, TransportError>;

    /// Human-readable location, used in error messages.
    fn describe(&self, resource: Resource<'_>) -> String;
}

/// Serves the registry layout from a directory tree:
/// `simple/index.json`, `json/<name>.json`, `files/<filename>`, and
/// `repos/<owner>/<repo>/<path>` for code-host license files.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    root: PathBuf,
}

impl FixtureTransport {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn path(&self, resource: Resource<'_>) -> Option<PathBuf> {
        let clean =
            |s: &str| !s.is_empty() && !s.split('/').any(|seg| seg == ".." || seg.is_empty());
        Some(match resource {
            Resource::Index => self.root.join("simple").join("index.json"),
            Resource::Metadata(name) if clean(name) && !name.contains('/') => {
                self.root.join("json").join(format!("{name}.json"))
            }
            Resource::File { filename, .. } if clean(filename) && !filename.contains('/') => {
                self.root.join("files").join(filename)
            }
            Resource::RepoFile { owner, repo, path }
                if clean(owner) && clean(repo) && clean(path) =>
            {
                self.root.join("repos").join(owner).join(repo).join(path)
            }
            _ => return None,
        })
    }
}

impl Transport for FixtureTransport {
    fn get(&self, resource: Resource<'_>) -> Result<Fetched, TransportError> {
        let Some(path) = self.path(resource) else {
            return Ok(Fetched::NotFound);
        };
        match std::fs::read(&path) {
            Ok(bytes) => Ok(Fetched::Body(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Fetched::NotFound),
            Err(e) => Err(TransportError::Permanent(format!(
                "{}: {e}",
                path.display()
            ))),
        }
    }

    fn describe(&self, resource: Resource<'_>) -> String {
        self.path(resource)
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| format!("{resource:?}"))
    }
}

/// Blocking HTTP transport against a live registry.
pub struct HttpTransport {
    base_url: String,
    repo_raw_base: String,
    agent: ureq::Agent,
    max_body: u64,
}

impl HttpTransport {
    pub fn new(base_url: &str, repo_raw_base: &str, user_agent: &str) -> Self {
        let agent = ureq::AgentBuilder::new()
            .user_agent(user_agent)
            .timeout_connect(Duration::from_secs(30))
            .timeout_read(Duration::from_secs(300))
            .build();
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            repo_raw_base: repo_raw_base.trim_end_matches('/').to_string(),
            agent,
            max_body: 8 << 30,
        }
    }

    fn url(&self, resource: Resource<'_>) -> String {
        match resource {
            Resource::Index => format!("{}/simple/", self.base_url),
            Resource::Metadata(name) => format!("{}/pypi/{name}/json", self.base_url),
            Resource::File { url, .. } => url.to_string(),
            Resource::RepoFile { owner, repo, path } => {
                format!("{}/{owner}/{repo}/HEAD/{path}", self.repo_raw_base)
            }
        }
    }
}

impl Transport for HttpTransport {
    fn get(&self, resource: Resource<'_>) -> Result<Fetched, TransportError> {
        let url = self.url(resource);
        let mut req = self.agent.get(&url);
        if resource == Resource::Index {
            req = req.set(
                "Accept",
                "application/vnd.pypi.simple.v1+json, text/html;q=0.1",
            );
        }
        match req.call() {
            Ok(resp) => {
                let mut body = Vec::new();
                resp.into_reader()
                    .take(self.max_body)
                    .read_to_end(&mut body)
                    .map_err(|e| TransportError::Transient(format!("{url}: {e}")))?;
                Ok(Fetched::Body(body))
            }
            Err(ureq::Error::Status(404 | 410, _)) => Ok(Fetched::NotFound),
            Err(ureq::Error::Status(code, _)) if code == 429 || code >= 500 => {
                Err(TransportError::Transient(format!("{url}: HTTP {code}")))
            }
            Err(ureq::Error::Status(code, _)) => {
                Err(TransportError::Permanent(format!("{url}: HTTP {code}")))
            }
            Err(e) => Err(TransportError::Transient(format!("{url}: {e}"))),
        }
    }

    fn describe(&self, resource: Resource<'_>) -> String {
        self.url(resource)
    }
}
