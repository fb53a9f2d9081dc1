use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{image_hash, Backend, BackendError, CacheKey, Decoding, GenerationRequest, GenerationResult, Modality};

/// One recorded exchange. Lines of a transcript file are these records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub backend_id: String,
    pub prompt_text: String,
    #[serde(default)]
    pub image_hash: String,
    pub decoding: Decoding,
    pub text: String,
}

impl TranscriptRecord {
    pub fn key(&self) -> CacheKey {
        CacheKey::from_parts(&self.backend_id, &self.prompt_text, &self.image_hash, &self.decoding)
    }
}

/// Replays recorded generations. Lookups miss with an error when `strict`,
/// otherwise with an empty completion.
pub struct TranscriptBackend {
    id: String,
    modality: Modality,
    entries: HashMap<CacheKey, String>,
    strict: bool,
}

impl TranscriptBackend {
    pub fn from_records(records: Vec<TranscriptRecord>, strict: bool) -> Result<Self, BackendError> {
        let id = records
            .first()
            .map(|r| r.backend_id.clone())
            .unwrap_or_else(|| "transcript".into());
        if let Some(other) = records.iter().find(|r| r.backend_id != id) {
            return Err(BackendError::Config(format!(
                "transcript mixes backends `{id}` and `{}`",
                other.backend_id
            )));
        }
        let entries = records.iter().map(|r| (r.key(), r.text.clone())).collect();
        Ok(TranscriptBackend {
            id,
            modality: Modality::Multimodal,
            entries,
            strict,
        })
    }

    pub fn load(path: &Path, strict: bool) -> Result<Self, BackendError> {
        let fail = |msg: String| BackendError::Config(format!("{}: {msg}", path.display()));
        let file = File::open(path).map_err(|e| fail(e.to_string()))?;
        let mut records = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| fail(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line).map_err(|e| fail(format!("line {}: {e}", n + 1)))?;
            records.push(rec);
        }
        Self::from_records(records, strict)
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = modality;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Backend for TranscriptBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn modality(&self) -> Modality {
        self.modality
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        request.check()?;
        let key = CacheKey::for_request(&self.id, request)?;
        match self.entries.get(&key) {
            Some(text) => Ok(GenerationResult::fresh(text.clone(), &self.id)),
            None if self.strict => Err(BackendError::MissingTranscript { key: key.to_string() }),
            None => Ok(GenerationResult::fresh("", &self.id)),
        }
    }
}

/// Appends every successful exchange of the wrapped backend to a transcript
/// file that [`TranscriptBackend`] can replay.
pub struct TranscriptRecorder<B> {
    inner: B,
    out: Mutex<File>,
}

impl<B: Backend> TranscriptRecorder<B> {
    pub fn new(inner: B, path: &Path) -> Result<Self, BackendError> {
        let out = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Ok(TranscriptRecorder {
            inner,
            out: Mutex::new(out),
        })
    }
}

impl<B: Backend> Backend for TranscriptRecorder<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn modality(&self) -> Modality {
        self.inner.modality()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        let result = self.inner.generate(request)?;
        let record = TranscriptRecord {
            backend_id: self.inner.id().to_owned(),
            prompt_text: request.prompt_text.clone(),
            image_hash: image_hash(request.image.as_ref())?,
            decoding: request.decoding.clone(),
            text: result.text.clone(),
        };
        let mut line = serde_json::to_string(&record).map_err(|e| BackendError::Protocol(e.to_string()))?;
        line.push('\n');
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        out.write_all(line.as_bytes())
            .map_err(|e| BackendError::Cache(format!("transcript write: {e}")))?;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(prompt: &str, text: &str) -> TranscriptRecord {
        TranscriptRecord {
            backend_id: "m".into(),
            prompt_text: prompt.into(),
            image_hash: String::new(),
            decoding: Decoding::default(),
            text: text.into(),
        }
    }

    #[test]
    fn hit_returns_recorded_text_uncached() {
        let t = TranscriptBackend::from_records(vec![record("p", "A")], true).unwrap();
        let r = t.generate(&GenerationRequest::new("p")).unwrap();
        assert_eq!((r.text.as_str(), r.cached), ("A", false));
    }

    #[test]
    fn miss_depends_on_strictness() {
        let strict = TranscriptBackend::from_records(vec![record("p", "A")], true).unwrap();
        assert!(matches!(
            strict.generate(&GenerationRequest::new("q")),
            Err(BackendError::MissingTranscript { .. })
        ));
        let lenient = TranscriptBackend::from_records(vec![record("p", "A")], false).unwrap();
        assert_eq!(lenient.generate(&GenerationRequest::new("q")).unwrap().text, "");
    }

    #[test]
    fn recorder_output_replays() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let source = TranscriptBackend::from_records(vec![record("p", "B."), record("q", "C")], true).unwrap();
        let rec = TranscriptRecorder::new(source, &path).unwrap();
        rec.generate(&GenerationRequest::new("p")).unwrap();
        drop(rec);
        let replay = TranscriptBackend::load(&path, true).unwrap();
        assert_eq!(replay.len(), 1);
        assert_eq!(replay.generate(&GenerationRequest::new("p")).unwrap().text, "B.");
    }
}
