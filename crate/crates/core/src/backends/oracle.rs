use std::collections::HashMap;

use super::{Backend, BackendError, GenerationRequest, GenerationResult, Modality, RequestMeta};
use crate::model::{Gold, MieInstance};
use crate::prompting::options::fill;
use crate::prompting::{OptionSubject, Stage};
use crate::schema::LabelSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// Answers with the letter the request's decode map assigns to the gold
    /// label.
    Gold,
    /// Answers by locating the gold option's wording in the prompt text and
    /// reading the letter printed beside it.
    ContentAware,
    /// Extracts gold spans but rejects every candidate.
    AlwaysNota,
}

impl OracleMode {
    fn backend_id(self) -> &'static str {
        match self {
            OracleMode::Gold => "oracle-gold",
            OracleMode::ContentAware => "oracle-content",
            OracleMode::AlwaysNota => "oracle-always-nota",
        }
    }
}

/// Programmatic backend answering from gold annotations. Deterministic and
/// independent of time and environment.
pub struct OracleBackend {
    mode: OracleMode,
    schema: LabelSchema,
    gold: HashMap<String, MieInstance>,
}

impl OracleBackend {
    pub fn new(mode: OracleMode, schema: LabelSchema, instances: impl IntoIterator<Item = MieInstance>) -> Self {
        let gold = instances.into_iter().map(|i| (i.id.clone(), i)).collect();
        OracleBackend { mode, schema, gold }
    }

    fn spans_of<'a>(&self, inst: &'a MieInstance, category: Option<&str>) -> Vec<&'a str> {
        let mut out: Vec<&str> = Vec::new();
        for s in inst.gold.spans() {
            if category.is_none_or(|c| c == s.label) && !out.contains(&s.span.surface.as_str()) {
                out.push(&s.span.surface);
            }
        }
        out
    }

    /// Gold label for the subject of a choice prompt.
    fn gold_label(&self, inst: &MieInstance, meta: &RequestMeta) -> String {
        match &inst.gold {
            Gold::Entities { .. } | Gold::Triggers { .. } => meta
                .candidate
                .as_deref()
                .and_then(|c| inst.gold.spans().iter().find(|s| s.span.surface == c))
                .map(|s| s.label.clone())
                .unwrap_or_else(|| self.schema.nota.id.clone()),
            Gold::Relation { relation, .. } => relation.clone(),
            Gold::Event { event } => event.clone(),
        }
    }

    fn preprocess_label(&self, inst: &MieInstance) -> String {
        inst.gold
            .spans()
            .first()
            .map(|s| s.label.clone())
            .or_else(|| self.schema.labels.first().map(|l| l.id.clone()))
            .unwrap_or_default()
    }

    fn expected_text(&self, inst: &MieInstance, meta: &RequestMeta, label: &str) -> Option<String> {
        if meta.stage == Stage::TedPreprocess {
            return self.schema.label(label)?.preprocess_text.clone();
        }
        let template = if self.schema.is_nota(label) {
            &self.schema.nota.option_text
        } else {
            &self.schema.label(label)?.option_text
        };
        let subject = match &inst.gold {
            Gold::Relation { head, tail, .. } => OptionSubject::Pair {
                head: &head.surface,
                tail: &tail.surface,
            },
            Gold::Event { .. } => OptionSubject::Context,
            _ => OptionSubject::Span(meta.candidate.as_deref().unwrap_or_default()),
        };
        Some(fill(template, subject))
    }

    fn letter_in_prompt(prompt: &str, text: &str) -> Option<char> {
        prompt.lines().find_map(|line| {
            let mut chars = line.chars();
            let letter = chars.next().filter(char::is_ascii_uppercase)?;
            (chars.as_str().strip_prefix(". ")? == text).then_some(letter)
        })
    }

    fn choose(&self, request: &GenerationRequest, inst: &MieInstance, meta: &RequestMeta, label: &str) -> String {
        let letter = match self.mode {
            OracleMode::ContentAware => {
                let nota_text = self.expected_text(inst, meta, &self.schema.nota.id);
                self.expected_text(inst, meta, label)
                    .and_then(|t| Self::letter_in_prompt(&request.prompt_text, &t))
                    .or_else(|| nota_text.and_then(|t| Self::letter_in_prompt(&request.prompt_text, &t)))
            }
            _ => meta.options.as_ref().and_then(|o| {
                o.letter_of(label)
                    .or_else(|| o.nota_label().and_then(|n| o.letter_of(n)))
            }),
        };
        letter.map(String::from).unwrap_or_default()
    }

    fn answer(&self, request: &GenerationRequest, meta: &RequestMeta) -> Result<String, BackendError> {
        let inst = self
            .gold
            .get(&meta.instance_id)
            .ok_or_else(|| BackendError::Protocol(format!("oracle has no instance `{}`", meta.instance_id)))?;
        let nota = self.schema.nota.id.as_str();
        Ok(match meta.stage {
            Stage::SpanExtraction => self.spans_of(inst, meta.category.as_deref()).join(", "),
            Stage::TedPreprocess => {
                let label = match self.mode {
                    OracleMode::AlwaysNota => return Ok("A".into()),
                    _ => self.preprocess_label(inst),
                };
                self.choose(request, inst, meta, &label)
            }
            Stage::ChoiceQa => {
                let label = match self.mode {
                    OracleMode::AlwaysNota => nota.to_owned(),
                    _ => self.gold_label(inst, meta),
                };
                self.choose(request, inst, meta, &label)
            }
            Stage::Vanilla | Stage::TextVanilla => match (&inst.gold, self.mode) {
                (Gold::Entities { .. } | Gold::Triggers { .. }, OracleMode::AlwaysNota) => String::new(),
                (Gold::Entities { .. } | Gold::Triggers { .. }, _) => {
                    self.spans_of(inst, Some(meta.category.as_deref().unwrap_or_default())).join(", ")
                }
                (_, OracleMode::AlwaysNota) => self.schema.nota.display.clone(),
                (gold, _) => {
                    let label = gold.label().unwrap_or(nota);
                    self.schema.display(label).unwrap_or(label).to_owned()
                }
            },
        })
    }
}

impl Backend for OracleBackend {
    fn id(&self) -> &str {
        self.mode.backend_id()
    }

    fn modality(&self) -> Modality {
        Modality::Multimodal
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        request.check()?;
        let meta = request
            .meta
            .as_ref()
            .ok_or_else(|| BackendError::Protocol("oracle requests need pipeline metadata".into()))?;
        Ok(GenerationResult::fresh(self.answer(request, meta)?, self.id()))
    }
}
