//! Content-addressed cache of fetched control-center documents.
//!
//! Each entry lives at `<dir>/<sha256(key)>.json`. An entry is stale once
//! `now - fetched_at > retention`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_RETENTION_SECS: u64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub fetched_at: u64,
    pub retention: u64,
    pub payload: String,
}

impl CacheEntry {
    pub fn is_stale(&self, now: u64) -> bool {
        now.saturating_sub(self.fetched_at) > self.retention
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheLookup {
    Hit(String),
    Stale(String),
    /// Absent or unreadable. `warning` explains a corrupt entry.
    Miss {
        warning: Option<String>,
    },
}

/// Canonical key for a source document and the path selected from it.
pub fn cache_key(uri: &str, source_path: &str) -> String {
    format!("{}#{}", uri.trim(), source_path.trim())
}

#[derive(Debug, Clone)]
pub struct CacheStore {
    dir: PathBuf,
}

impl CacheStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, key: &str) -> PathBuf {
        let digest = Sha256::digest(key.as_bytes());
        self.dir.join(format!("{}.json", hex::encode(digest)))
    }

    pub fn lookup(&self, key: &str, now: u64) -> CacheLookup {
        let path = self.entry_path(key);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return CacheLookup::Miss { warning: None }
            }
            Err(e) => return corrupt(&path, e.to_string()),
        };
        let entry: CacheEntry = match serde_json::from_str(&text) {
            Ok(entry) => entry,
            Err(e) => return corrupt(&path, e.to_string()),
        };
        if entry.key != key {
            return corrupt(&path, format!("entry belongs to {:?}", entry.key));
        }
        if entry.is_stale(now) {
            CacheLookup::Stale(entry.payload)
        } else {
            CacheLookup::Hit(entry.payload)
        }
    }

    /// Writes an entry. Callers serialize writers.
    pub fn store(&self, entry: &CacheEntry) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let path = self.entry_path(&entry.key);
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_string_pretty(entry).map_err(std::io::Error::other)?;
        fs::write(&tmp, body)?;
        fs::rename(tmp, path)
    }
}

fn corrupt(path: &Path, reason: String) -> CacheLookup {
    let warning = format!("ignoring corrupt cache entry {}: {reason}", path.display());
    log::warn!("{warning}");
    CacheLookup::Miss {
        warning: Some(warning),
    }
}

pub fn cache_lookup(store: &CacheStore, key: &str, now: u64) -> CacheLookup {
    store.lookup(key, now)
}
