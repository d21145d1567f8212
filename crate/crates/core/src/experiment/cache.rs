//! On-disk cache of generated texts, one JSONL file per grid cell.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::decoder::GenerationRecord;

pub const CACHE_ENV: &str = "INFILL_CACHE_DIR";

/// `$INFILL_CACHE_DIR`, else the configured directory, else
/// `<output_dir>/cache`.
pub fn resolve_cache_dir(configured: Option<&Path>, output_dir: &Path) -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    configured.map_or_else(|| output_dir.join("cache"), Path::to_path_buf)
}

/// Hex SHA-256 of length-prefixed parts, so `["ab","c"]` and `["a","bc"]`
/// differ.
pub fn digest_parts<S: AsRef<[u8]>>(parts: &[S]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        let p = p.as_ref();
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug)]
pub struct GenerationCache {
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl GenerationCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, ExperimentError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
        Ok(GenerationCache {
            dir,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.jsonl"))
    }

    /// Cached records, or `None` on a miss. Unreadable entries count as misses.
    pub fn load(&self, key: &str) -> Option<Vec<GenerationRecord>> {
        let found = std::fs::read_to_string(self.path(key))
            .ok()
            .and_then(|text| {
                text.lines()
                    .filter(|l| !l.trim().is_empty())
                    .map(serde_json::from_str)
                    .collect::<Result<Vec<GenerationRecord>, _>>()
                    .ok()
            });
        match &found {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        found
    }

    pub fn store(&self, key: &str, records: &[GenerationRecord]) -> Result<(), ExperimentError> {
        let mut text = String::new();
        for r in records {
            text.push_str(&r.to_json());
            text.push('\n');
        }
        let path = self.path(key);
        let tmp = self.dir.join(format!("{key}.tmp"));
        std::fs::write(&tmp, text).map_err(|e| ExperimentError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| ExperimentError::io(&path, e))
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }
}
