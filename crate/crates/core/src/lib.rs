//! Multi-choice QA reformulation of multimodal information extraction.
//!
//! Tasks (MNER, MRE, MIED, MTED) are decomposed into optional span
//! extraction and lettered multi-choice classification with a
//! none-of-the-above option; generations come from pluggable backends and
//! are scored with micro-averaged F1.

pub mod backends;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod manifest;
pub mod model;
pub mod parsing;
pub mod pipeline;
pub mod prompting;
pub mod rng;
pub mod sampling;
pub mod schema;

pub use backends::{Backend, BackendError, GenerationRequest, GenerationResult, Modality};
pub use dataset::Dataset;
pub use error::{Error, ErrorKind, Result};
pub use evaluation::{EvalReport, MatchCounts, Metrics, NotaPolicy};
pub use model::{
    Gold, ImageRef, LabelId, LabeledSpan, MieInstance, Payload, Prediction, Sentence, Span, TaskKind, Violation,
};
pub use parsing::{ParseMethod, ParseOutcome};
pub use pipeline::{Method, Pipeline, PipelineConfig, StageTrace};
pub use prompting::{OptionSet, PromptTemplate, RenderedPrompt, Stage, TemplateFidelity, TemplateRegistry};
pub use schema::LabelSchema;
