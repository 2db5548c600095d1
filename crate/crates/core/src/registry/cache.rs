use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::RegistryError;

/// On-disk response cache keyed by relative paths such as
/// `json/<name>.json` or `files/<filename>`.
///
/// Reads are lock-free; writes go through a per-key mutex and land via
/// write-to-temp + rename, so a reader never observes a partial entry.
#[derive(Debug)]
pub struct Cache {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &str) -> Result<PathBuf, RegistryError> {
        let rel = Path::new(key);
        let safe = !key.is_empty() && rel.components().all(|c| matches!(c, Component::Normal(_)));
        if !safe {
            return Err(RegistryError::Cache(format!("unsafe cache key {key:?}")));
        }
        Ok(self.root.join(rel))
    }

    pub fn lookup(&self, key: &str) -> Result<Option<PathBuf>, RegistryError> {
        let path = self.path_for(key)?;
        Ok(path.is_file().then_some(path))
    }

    pub fn read(&self, key: &str) -> Result<Option<Vec<u8>>, RegistryError> {
        match self.lookup(key)? {
            Some(p) => Ok(Some(fs::read(&p).map_err(|e| io_err(&p, e))?)),
            None => Ok(None),
        }
    }

    fn key_lock(&self, key: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        Arc::clone(locks.entry(key.to_string()).or_default())
    }

    pub fn write(&self, key: &str, bytes: &[u8]) -> Result<PathBuf, RegistryError> {
        let lock = self.key_lock(key);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        self.write_locked(key, bytes)
    }

    fn write_locked(&self, key: &str, bytes: &[u8]) -> Result<PathBuf, RegistryError> {
        let path = self.path_for(key)?;
        let dir = path.parent().unwrap_or(&self.root);
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let tmp = path.with_extension(format!(
            "partial-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        {
            let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
            f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
            f.sync_all().map_err(|e| io_err(&tmp, e))?;
        }
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// Returns the cached path for `key`, or runs `fetch` and stores its
    /// bytes. Concurrent callers for the same key fetch at most once.
    pub fn get_or_fetch<F>(&self, key: &str, fetch: F) -> Result<(PathBuf, bool), RegistryError>
    where
        F: FnOnce() -> Result<Vec<u8>, RegistryError>,
    {
        if let Some(p) = self.lookup(key)? {
            return Ok((p, true));
        }
        let lock = self.key_lock(key);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(p) = self.lookup(key)? {
            return Ok((p, true));
        }
        let bytes = fetch()?;
        Ok((self.write_locked(key, &bytes)?, false))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> RegistryError {
    RegistryError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}
