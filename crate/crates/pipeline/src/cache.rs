//! Content-addressed cache of adapter outputs under `<work_dir>/cache`.
//!
//! A key hashes the stage, its command template, every input's content and
//! any stage parameters, so a hit means nothing that could change the
//! output has changed. The index file is the only shared mutable state and
//! sits behind a mutex.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::StageAdapter;
use crate::error::{write, PipelineError, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Builds a cache key from length-prefixed parts, so no two different
/// part lists collide by concatenation.
#[derive(Default)]
pub struct KeyBuilder(Sha256);

impl KeyBuilder {
    pub fn for_adapter(adapter: &StageAdapter) -> Self {
        let mut k = KeyBuilder::default()
            .part(b"sv2svt-cache-1")
            .part(adapter.stage.name().as_bytes());
        for arg in &adapter.command {
            k = k.part(arg.as_bytes());
        }
        k
    }

    pub fn part(mut self, bytes: &[u8]) -> Self {
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
        self
    }

    pub fn finish(self) -> String {
        format!("{:x}", self.0.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct IndexEntry {
    stage: String,
    sha256: String,
}

pub struct Cache {
    dir: PathBuf,
    enabled: bool,
    index: Mutex<BTreeMap<String, IndexEntry>>,
}

impl Cache {
    pub fn open(work_dir: &Path, enabled: bool) -> Result<Cache> {
        let dir = work_dir.join("cache");
        let index_path = dir.join("index.json");
        let index = match std::fs::read_to_string(&index_path) {
            // A damaged index only costs recomputation.
            Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(PipelineError::io(index_path, e)),
        };
        Ok(Cache {
            dir,
            enabled,
            index: Mutex::new(index),
        })
    }

    fn blob(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(key)
    }

    /// The stored output for `key`, if present and intact.
    pub fn get(&self, key: &str) -> Option<Vec<u8>> {
        if !self.enabled {
            return None;
        }
        let expected = self
            .index
            .lock()
            .expect("cache lock")
            .get(key)?
            .sha256
            .clone();
        let bytes = std::fs::read(self.blob(key)).ok()?;
        (sha256_hex(&bytes) == expected).then_some(bytes)
    }

    pub fn put(&self, key: &str, stage: &str, bytes: &[u8]) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        let blob = self.blob(key);
        let tmp = blob.with_extension("tmp");
        write(&tmp, bytes)?;
        std::fs::rename(&tmp, &blob).map_err(|e| PipelineError::io(&blob, e))?;
        let mut index = self.index.lock().expect("cache lock");
        index.insert(
            key.to_string(),
            IndexEntry {
                stage: stage.into(),
                sha256: sha256_hex(bytes),
            },
        );
        let text = serde_json::to_string_pretty(&*index).expect("index serializes");
        let path = self.dir.join("index.json");
        let tmp = path.with_extension("tmp");
        write(&tmp, text)?;
        std::fs::rename(&tmp, &path).map_err(|e| PipelineError::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_unambiguous() {
        let a = KeyBuilder::default().part(b"ab").part(b"c").finish();
        let b = KeyBuilder::default().part(b"a").part(b"bc").finish();
        assert_ne!(a, b);
        assert_eq!(a, KeyBuilder::default().part(b"ab").part(b"c").finish());
    }

    #[test]
    fn stores_verifies_and_persists() {
        let dir = tempfile::tempdir().unwrap();
        let key = KeyBuilder::default().part(b"x").finish();
        let cache = Cache::open(dir.path(), true).unwrap();
        assert_eq!(cache.get(&key), None);
        cache.put(&key, "vme", b"data").unwrap();
        assert_eq!(cache.get(&key).unwrap(), b"data");
        let reopened = Cache::open(dir.path(), true).unwrap();
        assert_eq!(reopened.get(&key).unwrap(), b"data");
        std::fs::write(reopened.blob(&key), b"tampered").unwrap();
        assert_eq!(reopened.get(&key), None);
        let off = Cache::open(dir.path(), false).unwrap();
        assert_eq!(off.get(&key), None);
    }
}
