//! Content-addressed store for reservoir embeddings, which dominate the cost
//! of a run. Entries are matrix containers named by the SHA-256 of
//! everything that determines them.

use std::path::{Path, PathBuf};

use rydberg_qrc::container::{load_matrix, save_matrix, StoredMatrix, EMBEDDING_MAGIC};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, StageExt};

pub const CACHE_ENV: &str = "QRC_CACHE_DIR";

#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

impl EmbeddingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `QRC_CACHE_DIR` if set, else `configured`, else `fallback`.
    pub fn locate(configured: Option<&Path>, fallback: &Path) -> Self {
        match std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
            Some(dir) => Self::new(dir),
            None => Self::new(configured.unwrap_or(fallback)),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Hex key over a sequence of identifying parts.
    pub fn key(parts: &[&[u8]]) -> String {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.qrcemb"))
    }

    /// Returns the cached rows for `key` or computes, stores and returns
    /// them. Unreadable or mis-shaped entries are recomputed.
    pub fn get_or_compute<F>(
        &self,
        key: &str,
        rows: usize,
        compute: F,
    ) -> Result<Vec<Vec<f64>>, BenchError>
    where
        F: FnOnce() -> Result<Vec<Vec<f64>>, BenchError>,
    {
        let path = self.path(key);
        if path.exists() {
            match load_matrix(&path, EMBEDDING_MAGIC) {
                Ok(m) if m.rows == rows => {
                    log::info!("embedding cache hit {}", path.display());
                    return Ok(m.to_rows());
                }
                Ok(m) => log::warn!(
                    "{}: {} rows cached, {rows} expected; recomputing",
                    path.display(),
                    m.rows
                ),
                Err(e) => log::warn!("{}: {e}; recomputing", path.display()),
            }
        }
        let values = compute()?;
        if !values.is_empty() {
            std::fs::create_dir_all(&self.dir).map_err(|e| BenchError::io(&self.dir, e))?;
            let tmp = self.dir.join(format!("{key}.{}.tmp", std::process::id()));
            save_matrix(
                &tmp,
                EMBEDDING_MAGIC,
                &StoredMatrix::from_rows(&values).stage("cache")?,
            )
            .stage("cache")?;
            std::fs::rename(&tmp, &path).map_err(|e| BenchError::io(&path, e))?;
        }
        Ok(values)
    }
}
