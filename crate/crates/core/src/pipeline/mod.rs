//! Vanilla and multi-choice flows per task.

mod config;
mod runner;
mod trace;

pub use config::{expected_calls, Method, PipelineConfig};
pub use runner::{filter_nota, InstanceRun, Pipeline, RunOutput};
pub use trace::{ParsedLabel, ParsedSpans, StageCall, StageTrace};
