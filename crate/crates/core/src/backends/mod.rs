//! Generation backends: programmatic oracles, transcript replay, a remote
//! chat-completions client, and a content-addressed response cache.

mod cache;
mod limiter;
mod oracle;
mod remote;
mod transcript;

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{ImageRef, LabelId};
use crate::prompting::{OptionSet, Stage};

pub use cache::{CacheStats, CachedBackend};
pub use limiter::Limiter;
pub use oracle::{OracleBackend, OracleMode};
pub use remote::{RemoteBackend, RemoteConfig};
pub use transcript::{TranscriptBackend, TranscriptRecord, TranscriptRecorder};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),

    #[error("server answered HTTP {status}: {body}")]
    Http { status: u16, body: String },

    #[error("authentication rejected: {0}")]
    Auth(String),

    #[error("backend `{backend}` cannot serve this request: {detail}")]
    UnsupportedModality { backend: String, detail: String },

    #[error("no transcript entry for key {key}")]
    MissingTranscript { key: String },

    #[error("malformed backend response: {0}")]
    Protocol(String),

    #[error("image unavailable: {0}")]
    Image(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error("backend configuration: {0}")]
    Config(String),

    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<BackendError> },
}

impl BackendError {
    /// Errors that abort a whole run instead of a single instance.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            BackendError::Auth(_) | BackendError::UnsupportedModality { .. } | BackendError::Config(_)
        )
    }

    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::Http { status, .. } => *status == 429 || (500..600).contains(status),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    TextOnly,
    Multimodal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub greedy: bool,
    pub temperature: f64,
    pub max_new_tokens: u32,
    #[serde(default)]
    pub stop: Vec<String>,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding {
            greedy: true,
            temperature: 0.0,
            max_new_tokens: 64,
            stop: Vec::new(),
        }
    }
}

/// Pipeline context attached to a request. Oracles read it; it never takes
/// part in cache keys or wire payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestMeta {
    pub instance_id: String,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<LabelId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<OptionSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub prompt_text: String,
    pub image: Option<ImageRef>,
    pub decoding: Decoding,
    pub meta: Option<RequestMeta>,
}

impl GenerationRequest {
    pub fn new(prompt_text: impl Into<String>) -> Self {
        GenerationRequest {
            prompt_text: prompt_text.into(),
            image: None,
            decoding: Decoding::default(),
            meta: None,
        }
    }

    pub fn with_image(mut self, image: Option<ImageRef>) -> Self {
        self.image = image;
        self
    }

    pub fn with_decoding(mut self, decoding: Decoding) -> Self {
        self.decoding = decoding;
        self
    }

    pub fn with_meta(mut self, meta: RequestMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    fn check(&self) -> Result<(), BackendError> {
        if self.decoding.max_new_tokens == 0 {
            return Err(BackendError::Config("max_new_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub backend_id: String,
    pub latency_ms: u64,
    pub cached: bool,
    #[serde(default)]
    pub retries: u32,
}

impl GenerationResult {
    pub fn fresh(text: impl Into<String>, backend_id: &str) -> Self {
        GenerationResult {
            text: text.into(),
            backend_id: backend_id.to_owned(),
            latency_ms: 0,
            cached: false,
            retries: 0,
        }
    }
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn modality(&self) -> Modality;
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn modality(&self) -> Modality {
        (**self).modality()
    }
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        (**self).generate(request)
    }
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn modality(&self) -> Modality {
        (**self).modality()
    }
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        (**self).generate(request)
    }
}

/// Hex SHA-256 over the canonical JSON of the logical request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

#[derive(Serialize)]
struct KeyFields<'a> {
    backend_id: &'a str,
    prompt_text: &'a str,
    image: &'a str,
    decoding: &'a Decoding,
}

impl CacheKey {
    pub fn from_parts(backend_id: &str, prompt_text: &str, image_hash: &str, decoding: &Decoding) -> Self {
        let fields = KeyFields {
            backend_id,
            prompt_text,
            image: image_hash,
            decoding,
        };
        let json = serde_json::to_vec(&fields).expect("key fields serialize");
        CacheKey(hex::encode(Sha256::digest(json)))
    }

    pub fn for_request(backend_id: &str, request: &GenerationRequest) -> Result<Self, BackendError> {
        let image_hash = image_hash(request.image.as_ref())?;
        Ok(Self::from_parts(backend_id, &request.prompt_text, &image_hash, &request.decoding))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn image_hash(image: Option<&ImageRef>) -> Result<String, BackendError> {
    match image {
        Some(img) => img.content_hash().map_err(|e| BackendError::Image(e.to_string())),
        None => Ok(String::new()),
    }
}

/// Counts calls that reach the wrapped backend.
pub struct CountingBackend<B> {
    inner: B,
    calls: Arc<AtomicUsize>,
}

impl<B: Backend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        CountingBackend {
            inner,
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Shared handle to the counter, usable after the backend is boxed.
    pub fn counter(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.calls)
    }
}

impl<B: Backend> Backend for CountingBackend<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }
    fn modality(&self) -> Modality {
        self.inner.modality()
    }
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.generate(request)
    }
}

/// Presents a backend as text-only, e.g. to exercise text-only prompting with
/// an oracle.
pub struct TextOnly<B>(pub B);

impl<B: Backend> Backend for TextOnly<B> {
    fn id(&self) -> &str {
        self.0.id()
    }
    fn modality(&self) -> Modality {
        Modality::TextOnly
    }
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        if request.image.is_some() {
            return Err(BackendError::UnsupportedModality {
                backend: self.0.id().to_owned(),
                detail: "request carries an image".into(),
            });
        }
        self.0.generate(request)
    }
}
