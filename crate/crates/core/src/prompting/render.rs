use serde::Serialize;

use super::options::OptionSet;
use super::template::{PromptTemplate, Stage, TemplateError};
use crate::error::{Error, Result};
use crate::model::{Gold, ImageRef, MieInstance, TaskKind};
use crate::schema::LabelSchema;

pub mod slots {
    pub const SENTENCE: &str = "Sentence";
    pub const ENTITY_CATEGORY: &str = "Entity category";
    pub const EVENT_CATEGORY: &str = "Event category";
    pub const PREDICTED_EVENT_CATEGORY: &str = "Predicted Event category";
    pub const OPTIONS: &str = "Options";
    pub const RELATION_LIST: &str = "Relation list";
    pub const TYPE_LIST: &str = "Type list";

    pub const ALL: [&str; 7] = [
        SENTENCE,
        ENTITY_CATEGORY,
        EVENT_CATEGORY,
        PREDICTED_EVENT_CATEGORY,
        OPTIONS,
        RELATION_LIST,
        TYPE_LIST,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderedPrompt {
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub option_set: Option<OptionSet>,
    pub template_id: String,
}

fn category_display<'a>(schema: &'a LabelSchema, category: &str) -> Result<&'a str> {
    schema
        .label(category)
        .map(|l| l.display.as_str())
        .ok_or_else(|| Error::Config(format!("`{category}` is not a label of schema `{}`", schema.id)))
}

/// Stage-1 extraction prompt for one entity category (MNER) or one
/// predicted event category (MTED).
pub fn render_span_extraction(
    template: &PromptTemplate,
    instance: &MieInstance,
    schema: &LabelSchema,
    category: &str,
) -> Result<RenderedPrompt> {
    template.expect_stage(&[Stage::SpanExtraction])?;
    let display = category_display(schema, category)?;
    let slot = match instance.task {
        TaskKind::Mner => slots::ENTITY_CATEGORY,
        TaskKind::Mted => slots::PREDICTED_EVENT_CATEGORY,
        other => return Err(Error::Config(format!("{other} has no span extraction stage"))),
    };
    let text = template.render(&[(slots::SENTENCE, &instance.sentence.text), (slot, display)])?;
    Ok(RenderedPrompt {
        text,
        image: None,
        option_set: None,
        template_id: template.id.clone(),
    })
}

/// Multi-choice prompt with the option block inserted in `options` order.
pub fn render_choice_qa(template: &PromptTemplate, instance: &MieInstance, options: &OptionSet) -> Result<RenderedPrompt> {
    template.expect_stage(&[Stage::ChoiceQa, Stage::TedPreprocess])?;
    if !template.has_placeholder(slots::OPTIONS) {
        return Err(TemplateError::MissingOptionSlot(template.id.clone()).into());
    }
    let block = options.block();
    let text = template.render(&[(slots::SENTENCE, &instance.sentence.text), (slots::OPTIONS, &block)])?;
    let image = (template.stage == Stage::ChoiceQa)
        .then(|| instance.image.clone())
        .flatten();
    Ok(RenderedPrompt {
        text,
        image,
        option_set: Some(options.clone()),
        template_id: template.id.clone(),
    })
}

/// Direct-answer prompt. MNER and MTED prompts are per category; MRE lists the
/// relations admitted for the instance's entity types plus NOTA; MIED lists
/// every event type plus NOTA.
pub fn render_vanilla(
    template: &PromptTemplate,
    instance: &MieInstance,
    schema: &LabelSchema,
    category: Option<&str>,
) -> Result<RenderedPrompt> {
    template.expect_stage(&[Stage::Vanilla, Stage::TextVanilla])?;
    let mut bindings: Vec<(&str, String)> = vec![(slots::SENTENCE, instance.sentence.text.clone())];
    match instance.task {
        TaskKind::Mner | TaskKind::Mted => {
            let category = category.ok_or_else(|| {
                Error::Config(format!("{} vanilla prompts need a category", instance.task))
            })?;
            let slot = if instance.task == TaskKind::Mner {
                slots::ENTITY_CATEGORY
            } else {
                slots::EVENT_CATEGORY
            };
            bindings.push((slot, category_display(schema, category)?.to_owned()));
        }
        TaskKind::Mre => {
            let Gold::Relation { head_type, tail_type, .. } = &instance.gold else {
                return Err(Error::Data(format!("instance {} has no relation annotation", instance.id)));
            };
            let mut lines: Vec<String> = schema
                .require_relation_candidates(head_type, tail_type)?
                .iter()
                .map(|r| format!("-{}", schema.display(r).unwrap_or(r)))
                .collect();
            lines.push(format!("-{}", schema.nota.display));
            bindings.push((slots::RELATION_LIST, lines.join("\n")));
        }
        TaskKind::Mied => {
            let mut lines: Vec<String> = schema.labels.iter().map(|l| format!("- {}", l.display)).collect();
            lines.push(format!("- {}", schema.nota.display));
            bindings.push((slots::TYPE_LIST, lines.join("\n")));
        }
    }
    let refs: Vec<(&str, &str)> = bindings.iter().map(|(k, v)| (*k, v.as_str())).collect();
    let text = template.render(&refs)?;
    let image = (template.stage == Stage::Vanilla)
        .then(|| instance.image.clone())
        .flatten();
    Ok(RenderedPrompt {
        text,
        image,
        option_set: None,
        template_id: template.id.clone(),
    })
}
