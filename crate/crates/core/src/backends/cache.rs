use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CacheKey, GenerationRequest, GenerationResult, Modality};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
    pub corrupt: usize,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: CacheKey,
    backend_id: String,
    text: String,
}

/// Persists every generation under `<dir>/<first two hex chars>/<key>.json`.
/// Hits never reach the wrapped backend.
pub struct CachedBackend<B> {
    inner: B,
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
    corrupt: AtomicUsize,
    tmp_seq: AtomicU64,
}

impl<B: Backend> CachedBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| BackendError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(CachedBackend {
            inner,
            dir,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            corrupt: AtomicUsize::new(0),
            tmp_seq: AtomicU64::new(0),
        })
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::SeqCst),
            misses: self.misses.load(Ordering::SeqCst),
            corrupt: self.corrupt.load(Ordering::SeqCst),
        }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(&key.as_str()[..2]).join(format!("{key}.json"))
    }

    fn read(&self, path: &Path, key: &CacheKey) -> Option<Entry> {
        let bytes = fs::read(path).ok()?;
        match serde_json::from_slice::<Entry>(&bytes) {
            Ok(entry) if &entry.key == key => Some(entry),
            _ => {
                log::warn!("ignoring corrupt cache entry {}", path.display());
                self.corrupt.fetch_add(1, Ordering::SeqCst);
                None
            }
        }
    }

    fn write(&self, path: &Path, entry: &Entry) -> Result<(), BackendError> {
        let fail = |e: std::io::Error| BackendError::Cache(format!("{}: {e}", path.display()));
        let parent = path.parent().expect("cache paths have a parent");
        fs::create_dir_all(parent).map_err(fail)?;
        let tmp = parent.join(format!(
            ".{}.{}.{}.tmp",
            entry.key,
            std::process::id(),
            self.tmp_seq.fetch_add(1, Ordering::SeqCst)
        ));
        let body = serde_json::to_vec(entry).map_err(|e| BackendError::Cache(e.to_string()))?;
        fs::write(&tmp, body).map_err(fail)?;
        fs::rename(&tmp, path).map_err(fail)
    }
}

impl<B: Backend> Backend for CachedBackend<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn modality(&self) -> Modality {
        self.inner.modality()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        request.check()?;
        let key = CacheKey::for_request(self.inner.id(), request)?;
        let path = self.path_for(&key);
        if let Some(entry) = self.read(&path, &key) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(GenerationResult {
                text: entry.text,
                backend_id: entry.backend_id,
                latency_ms: 0,
                cached: true,
                retries: 0,
            });
        }
        self.misses.fetch_add(1, Ordering::SeqCst);
        let result = self.inner.generate(request)?;
        let entry = Entry {
            key,
            backend_id: result.backend_id.clone(),
            text: result.text.clone(),
        };
        if let Err(e) = self.write(&path, &entry) {
            log::warn!("{e}");
        }
        Ok(result)
    }
}
