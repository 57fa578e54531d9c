use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Generation,
    Embedding,
}

/// SHA-256 over `model_id`, a NUL byte, and `input`, as lowercase hex.
pub fn cache_key(model_id: &str, input: &str) -> String {
    let mut h = Sha256::new();
    h.update(model_id.as_bytes());
    h.update([0u8]);
    h.update(input.as_bytes());
    hex::encode(h.finalize())
}

/// `<dir>/<key>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub kind: EntryKind,
    pub model_id: String,
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    /// Unix seconds.
    pub fetched_at: u64,
}

impl CacheEntry {
    pub fn generation(model_id: &str, prompt: &str, text: &str) -> Self {
        Self {
            kind: EntryKind::Generation,
            model_id: model_id.into(),
            input: prompt.into(),
            text: Some(text.into()),
            embedding: None,
            fetched_at: now(),
        }
    }

    pub fn embedding(model_id: &str, text: &str, vector: Vec<f64>) -> Self {
        Self {
            kind: EntryKind::Embedding,
            model_id: model_id.into(),
            input: text.into(),
            text: None,
            embedding: Some(vector),
            fetched_at: now(),
        }
    }

    pub fn key(&self) -> String {
        cache_key(&self.model_id, &self.input)
    }
}

pub(crate) fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

static TMP_SEQ: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>> {
        let p = self.path(key);
        match std::fs::read_to_string(&p) {
            Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(p, e)),
        }
    }

    /// Write through a temporary file and rename, so readers never observe a
    /// partial entry. Concurrent writers of one key race benignly.
    pub fn put(&self, entry: &CacheEntry) -> Result<String> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let key = entry.key();
        let dest = self.path(&key);
        let seq = TMP_SEQ.fetch_add(1, Ordering::Relaxed);
        let tmp = self.dir.join(format!(".{key}.{}.{seq}.tmp", std::process::id()));
        let text = serde_json::to_string_pretty(entry)?;
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &dest).map_err(|e| Error::io(&dest, e))?;
        Ok(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_stable_and_separated() {
        assert_eq!(cache_key("m", "abc"), cache_key("m", "abc"));
        assert_ne!(cache_key("ma", "bc"), cache_key("m", "abc"));
        assert_eq!(cache_key("m", "abc").len(), 64);
    }

    #[test]
    fn put_then_get_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let e = CacheEntry::generation("gemini", "What?", "Ünïcode text\nwith lines");
        let key = cache.put(&e).unwrap();
        assert!(cache.path(&key).exists());
        assert_eq!(cache.get(&key).unwrap(), Some(e));
        assert_eq!(cache.get("nope").unwrap(), None);
    }
}
