use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendError, GenerationRequest, GenerationResult, Limiter, Modality};

fn default_api_key_env() -> String {
    "MQA_API_KEY".into()
}
fn default_max_in_flight() -> usize {
    4
}
fn default_timeout_secs() -> u64 {
    60
}
fn default_max_attempts() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    1000
}
fn default_multimodal() -> bool {
    true
}

/// Settings for a chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token. Unset means no
    /// `Authorization` header.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    /// First retry delay; doubles on each further retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_multimodal")]
    pub multimodal: bool,
    /// Identifier used in cache keys; defaults to `remote:<model>`.
    #[serde(default)]
    pub id: Option<String>,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: default_api_key_env(),
            max_in_flight: default_max_in_flight(),
            timeout_secs: default_timeout_secs(),
            max_attempts: default_max_attempts(),
            backoff_base_ms: default_backoff_ms(),
            multimodal: default_multimodal(),
            id: None,
        }
    }
}

pub struct RemoteBackend {
    id: String,
    config: RemoteConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    limiter: Limiter,
}

/// MIME type from leading magic bytes.
fn sniff_mime(bytes: &[u8]) -> Option<&'static str> {
    match bytes {
        [0x89, b'P', b'N', b'G', ..] => Some("image/png"),
        [0xFF, 0xD8, 0xFF, ..] => Some("image/jpeg"),
        [b'G', b'I', b'F', b'8', ..] => Some("image/gif"),
        [b'R', b'I', b'F', b'F', _, _, _, _, b'W', b'E', b'B', b'P', ..] => Some("image/webp"),
        _ => None,
    }
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        if config.max_attempts == 0 {
            return Err(BackendError::Config("max_attempts must be at least 1".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let id = config.id.clone().unwrap_or_else(|| format!("remote:{}", config.model));
        Ok(RemoteBackend {
            id,
            limiter: Limiter::new(config.max_in_flight),
            config,
            api_key,
            client,
        })
    }

    /// Overrides the key read from the environment.
    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn payload(&self, request: &GenerationRequest) -> Result<Value, BackendError> {
        let mut content = vec![json!({"type": "text", "text": request.prompt_text})];
        if let Some(image) = &request.image {
            let bytes = image.read_bytes().map_err(|e| BackendError::Image(e.to_string()))?;
            let mime = sniff_mime(&bytes)
                .ok_or_else(|| BackendError::Image(format!("{}: unrecognised image format", image.uri())))?;
            let data = base64::engine::general_purpose::STANDARD.encode(&bytes);
            content.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:{mime};base64,{data}")}
            }));
        }
        let d = &request.decoding;
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": content}],
            "max_tokens": d.max_new_tokens,
            "temperature": if d.greedy { 0.0 } else { d.temperature },
        });
        if !d.stop.is_empty() {
            body["stop"] = json!(d.stop);
        }
        Ok(body)
    }

    fn attempt(&self, body: &Value) -> Result<String, BackendError> {
        let _permit = self.limiter.acquire();
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(BackendError::Auth(format!("HTTP {status}"))),
            _ => return Err(BackendError::Http { status, body: text }),
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| BackendError::Protocol(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| BackendError::Protocol("response lacks choices[0].message.content".into()))
    }
}

impl Backend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn modality(&self) -> Modality {
        if self.config.multimodal {
            Modality::Multimodal
        } else {
            Modality::TextOnly
        }
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        request.check()?;
        if request.image.is_some() && !self.config.multimodal {
            return Err(BackendError::UnsupportedModality {
                backend: self.id.clone(),
                detail: "request carries an image".into(),
            });
        }
        let body = self.payload(request)?;
        let start = Instant::now();
        let mut retries = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => {
                    return Ok(GenerationResult {
                        text,
                        backend_id: self.id.clone(),
                        latency_ms: start.elapsed().as_millis() as u64,
                        cached: false,
                        retries,
                    })
                }
                Err(e) if e.is_retryable() && retries + 1 < self.config.max_attempts => {
                    let delay = self.config.backoff_base_ms.saturating_mul(1 << retries.min(16));
                    log::warn!("{}: {e}; retrying in {delay} ms", self.id);
                    std::thread::sleep(Duration::from_millis(delay));
                    retries += 1;
                }
                Err(e) if e.is_retryable() => {
                    return Err(BackendError::Exhausted {
                        attempts: retries + 1,
                        last: Box::new(e),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }
}
