//! Content-addressed response store: `<dir>/<first two hex>/<key>.json`.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{CacheKey, GatewayError, KeyedRequest};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request: KeyedRequest,
    pub completion: String,
    /// Seconds since the Unix epoch at write time.
    pub timestamp: u64,
}

#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    tmp_counter: AtomicU64,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache {
            dir: dir.into(),
            tmp_counter: AtomicU64::new(0),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        let hex = key.as_str();
        self.dir.join(&hex[..2]).join(format!("{hex}.json"))
    }

    /// Cached completion for `key`. Unreadable or foreign entries count as
    /// misses.
    pub fn get(&self, key: &CacheKey, request: &KeyedRequest) -> Option<String> {
        let path = self.path_for(key);
        let bytes = std::fs::read(&path).ok()?;
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(entry) if &entry.request == request => Some(entry.completion),
            Ok(_) => {
                log::warn!("cache entry {} does not match its key; ignoring", path.display());
                None
            }
            Err(e) => {
                log::warn!("corrupt cache entry {}: {e}", path.display());
                None
            }
        }
    }

    /// Stores an entry via write-to-temp then rename, so concurrent readers
    /// never observe a partial file.
    pub fn put(&self, key: &CacheKey, request: &KeyedRequest, completion: &str) -> Result<(), GatewayError> {
        let path = self.path_for(key);
        let parent = path.parent().expect("cache path has a parent");
        let io = |e: std::io::Error| GatewayError::Cache(format!("{}: {e}", path.display()));
        std::fs::create_dir_all(parent).map_err(io)?;
        let entry = CacheEntry {
            request: request.clone(),
            completion: completion.to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let tmp = parent.join(format!(
            ".{}.{}.{}.tmp",
            key.as_str(),
            std::process::id(),
            self.tmp_counter.fetch_add(1, Ordering::Relaxed)
        ));
        let body = serde_json::to_vec_pretty(&entry).expect("cache entry serializes");
        std::fs::write(&tmp, body).map_err(io)?;
        std::fs::rename(&tmp, &path).map_err(io)?;
        Ok(())
    }
}
