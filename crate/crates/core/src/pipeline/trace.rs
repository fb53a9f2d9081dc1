use serde::{Deserialize, Serialize};

use crate::model::LabelId;
use crate::parsing::{ParseMethod, ParseOutcome};
use crate::prompting::Stage;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedLabel {
    pub value: Option<LabelId>,
    pub method: ParseMethod,
}

impl From<&ParseOutcome> for ParsedLabel {
    fn from(o: &ParseOutcome) -> Self {
        ParsedLabel {
            value: o.value.clone(),
            method: o.method,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSpans {
    pub kept: Vec<String>,
    pub dropped: usize,
}

/// One model call: which prompt, what came back, and how it was read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCall {
    pub stage: Stage,
    pub template_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<LabelId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<ParsedLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<ParsedSpans>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTrace {
    pub instance_id: String,
    pub calls: Vec<StageCall>,
    /// Set when the backend failed for this instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StageTrace {
    pub fn new(instance_id: impl Into<String>) -> Self {
        StageTrace {
            instance_id: instance_id.into(),
            calls: Vec::new(),
            error: None,
        }
    }

    pub fn count(&self, stage: Stage) -> usize {
        self.calls.iter().filter(|c| c.stage == stage).count()
    }
}
