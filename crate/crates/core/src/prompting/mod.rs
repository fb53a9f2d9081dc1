//! Prompt templates, answer options and rendering.

pub(crate) mod options;
mod render;
mod template;

pub use options::{
    apply_order, build_option_set, build_preprocess_options, permute_option_set, AnswerOption, OptionSet,
    OptionSubject, TemplateFidelity,
};
pub use render::{render_choice_qa, render_span_extraction, render_vanilla, slots, RenderedPrompt};
pub use template::{
    residual_placeholders, shipped_checksums, template_id, PromptTemplate, Stage, TemplateError, TemplateRegistry,
};
