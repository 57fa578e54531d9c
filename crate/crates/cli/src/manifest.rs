//! Run manifests: config hashes and artifact checksums per output directory.
//!
//! An entry is fresh when its config hash matches and every recorded artifact
//! still has the recorded checksum; fresh entries let a command skip work.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub entries: BTreeMap<String, ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub config_hash: String,
    /// Input path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Artifact path relative to the manifest directory, to SHA-256.
    pub artifacts: BTreeMap<String, String>,
    pub created_at: u64,
    pub updated_at: u64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let k = f
            .read(&mut buf)
            .with_context(|| format!("reading {}", path.display()))?;
        if k == 0 {
            break;
        }
        h.update(&buf[..k]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Hash of a JSON value. serde_json maps are sorted, so this is canonical.
pub fn config_hash(value: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

/// Checksums of input files keyed by their displayed path.
pub fn input_checksums(paths: &[&Path]) -> Result<BTreeMap<String, String>> {
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
        .collect()
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(FILE);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        // An unreadable manifest only costs a recomputation.
        Ok(serde_json::from_str(&text).unwrap_or_else(|e| {
            log::warn!("ignoring corrupt manifest {}: {e}", path.display());
            Self::default()
        }))
    }

    pub fn save(&mut self, dir: &Path) -> Result<()> {
        self.tool_version = env!("CARGO_PKG_VERSION").to_string();
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(FILE);
        let tmp = dir.join(format!(".{FILE}.{}", std::process::id()));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    /// True when `key` was produced by the same config and its artifacts are intact.
    pub fn is_fresh(&self, dir: &Path, key: &str, config_hash: &str) -> bool {
        let Some(e) = self.entries.get(key) else { return false };
        e.config_hash == config_hash
            && !e.artifacts.is_empty()
            && e.artifacts
                .iter()
                .all(|(rel, sum)| sha256_file(&dir.join(rel)).is_ok_and(|s| &s == sum))
    }

    /// Record artifacts (paths relative to `dir`) under `key`.
    pub fn record(
        &mut self,
        dir: &Path,
        key: &str,
        command: &str,
        config_hash: &str,
        inputs: BTreeMap<String, String>,
        artifacts: &[&str],
    ) -> Result<()> {
        let sums = artifacts
            .iter()
            .map(|rel| Ok((rel.to_string(), sha256_file(&dir.join(rel))?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let t = now();
        let created_at = self.entries.get(key).map_or(t, |e| e.created_at);
        self.entries.insert(
            key.to_string(),
            ManifestEntry {
                command: command.to_string(),
                config_hash: config_hash.to_string(),
                inputs,
                artifacts: sums,
                created_at,
                updated_at: t,
            },
        );
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn freshness_tracks_config_and_content() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "x").unwrap();
        let mut m = Manifest::default();
        m.record(dir.path(), "k", "test", "h1", BTreeMap::new(), &["a.txt"])
            .unwrap();
        m.save(dir.path()).unwrap();
        let m = Manifest::load(dir.path()).unwrap();
        assert!(m.is_fresh(dir.path(), "k", "h1"));
        assert!(!m.is_fresh(dir.path(), "k", "h2"));
        assert!(!m.is_fresh(dir.path(), "other", "h1"));
        fs::write(dir.path().join("a.txt"), "y").unwrap();
        assert!(!m.is_fresh(dir.path(), "k", "h1"));
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"a":1,"b":[2,3]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"b":[2,3],"a":1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
    }
}
