#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Mutex;

use mqa_core::backends::GenerationResult;
use mqa_core::{Backend, BackendError, Dataset, GenerationRequest, LabelSchema, Modality, TaskKind};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn dataset_path(task: TaskKind) -> PathBuf {
    fixtures().join("datasets").join(format!("{}.jsonl", task.as_str()))
}

pub fn schema_name(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Mner => "twitter17",
        TaskKind::Mre => "mnre_v2",
        TaskKind::Mied => "m2e2_image",
        TaskKind::Mted => "m2e2_text",
    }
}

pub fn load(task: TaskKind) -> (LabelSchema, Dataset) {
    let schema = LabelSchema::builtin(schema_name(task)).unwrap();
    let dataset = Dataset::load(&dataset_path(task)).unwrap();
    dataset.ensure_valid(&schema).unwrap();
    (schema, dataset)
}

/// Passes requests through and keeps a copy of each.
pub struct Recording<B> {
    pub inner: B,
    pub seen: Mutex<Vec<GenerationRequest>>,
}

impl<B> Recording<B> {
    pub fn new(inner: B) -> Self {
        Recording {
            inner,
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn take(&self) -> Vec<GenerationRequest> {
        std::mem::take(&mut self.seen.lock().unwrap())
    }
}

impl<B: Backend> Backend for Recording<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }
    fn modality(&self) -> Modality {
        self.inner.modality()
    }
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        self.seen.lock().unwrap().push(request.clone());
        self.inner.generate(request)
    }
}
