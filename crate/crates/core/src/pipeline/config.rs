use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backends::Decoding;
use crate::error::{Error, Result};
use crate::model::TaskKind;
use crate::prompting::TemplateFidelity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Direct label or span generation.
    Vanilla,
    /// Span extraction followed by multi-choice classification.
    #[default]
    Mqa,
    /// Multi-choice classification over gold spans (MNER and MTED only).
    MqaGoldSpan,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Mqa => "mqa",
            Method::MqaGoldSpan => "mqa_gold_span",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Method::Vanilla),
            "mqa" => Ok(Method::Mqa),
            "mqa_gold_span" | "mqa-gold-span" => Ok(Method::MqaGoldSpan),
            _ => Err(Error::Config(format!("unknown method `{s}` (vanilla, mqa, mqa_gold_span)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub method: Method,
    /// Instruction variant, 1 to 4.
    pub variant: u8,
    /// Answer-option shuffle seed; 0 keeps schema order.
    pub option_seed: u64,
    pub decoding: Decoding,
    /// Overrides the schema's span grounding case sensitivity.
    pub span_case_sensitive: Option<bool>,
    pub fidelity: TemplateFidelity,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            method: Method::Mqa,
            variant: 1,
            option_seed: 0,
            decoding: Decoding::default(),
            span_case_sensitive: None,
            fidelity: TemplateFidelity::Schema,
        }
    }
}

impl PipelineConfig {
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_variant(mut self, variant: u8) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_option_seed(mut self, seed: u64) -> Self {
        self.option_seed = seed;
        self
    }

    pub fn validate(&self, task: TaskKind) -> Result<()> {
        if !(1..=4).contains(&self.variant) {
            return Err(Error::Config(format!("variant must be 1 to 4, got {}", self.variant)));
        }
        if self.method == Method::MqaGoldSpan && !task.is_span_task() {
            return Err(Error::Config(format!("mqa_gold_span applies to MNER and MTED, not {task}")));
        }
        if self.decoding.max_new_tokens == 0 {
            return Err(Error::Config("max_new_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

/// Model calls one instance needs: MRE/MIED make one; MNER makes one
/// extraction call per category plus one choice call per candidate; MTED
/// makes a pre-process call, one extraction call and one choice call per
/// candidate. Gold-span runs skip extraction; vanilla span tasks make one
/// call per category.
pub fn expected_calls(task: TaskKind, method: Method, categories: usize, candidates: usize) -> usize {
    match (task, method) {
        (TaskKind::Mre | TaskKind::Mied, _) => 1,
        (_, Method::Vanilla) => categories,
        (_, Method::MqaGoldSpan) => candidates,
        (TaskKind::Mner, Method::Mqa) => categories + candidates,
        (TaskKind::Mted, Method::Mqa) => 2 + candidates,
    }
}
