use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Vanilla,
    SpanExtraction,
    TedPreprocess,
    ChoiceQa,
    /// Vanilla prompts for text-only chat models.
    TextVanilla,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Vanilla,
        Stage::SpanExtraction,
        Stage::TedPreprocess,
        Stage::ChoiceQa,
        Stage::TextVanilla,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Vanilla => "vanilla",
            Stage::SpanExtraction => "span_extraction",
            Stage::TedPreprocess => "ted_preprocess",
            Stage::ChoiceQa => "choice_qa",
            Stage::TextVanilla => "text_vanilla",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| TemplateError::UnknownStage(s.to_owned()))
    }
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template {template}: unbound placeholder [{name}]")]
    Unbound { template: String, name: String },
    #[error("template {template}: unterminated placeholder at byte {at}")]
    Malformed { template: String, at: usize },
    #[error("template {template} is a {actual} template, expected {expected}")]
    WrongStage {
        template: String,
        expected: String,
        actual: Stage,
    },
    #[error("template {0} has no [Options] slot")]
    MissingOptionSlot(String),
    #[error("no template for {task}/{stage}/v{variant}")]
    NotFound { task: TaskKind, stage: Stage, variant: u8 },
    #[error("unknown template stage `{0}`")]
    UnknownStage(String),
    #[error("template {id} does not match the shipped checksum")]
    FidelityMismatch { id: String },
    #[error("{0}")]
    Render(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

/// Prompt text with `[Name]` placeholders. `[[` is a literal `[`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub task: TaskKind,
    pub stage: Stage,
    pub variant: u8,
    body: String,
    segments: Vec<Segment>,
    checksum: String,
}

impl PromptTemplate {
    pub fn parse(task: TaskKind, stage: Stage, variant: u8, body: &str) -> Result<Self, TemplateError> {
        let id = template_id(task, stage, variant);
        let segments = parse_segments(&id, body)?;
        Ok(PromptTemplate {
            checksum: hex::encode(Sha256::digest(asset_bytes(body))),
            id,
            task,
            stage,
            variant,
            body: body.to_owned(),
            segments,
        })
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// SHA-256 of the asset file this template corresponds to.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot(n) => Some(n.as_str()),
            Segment::Text(_) => None,
        })
    }

    pub fn has_placeholder(&self, name: &str) -> bool {
        self.placeholders().any(|p| p == name)
    }

    /// Substitutes every placeholder. Bound values are inserted verbatim and
    /// never rescanned; bindings the template does not use are ignored.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.body.len() + 128);
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(name) => {
                    let value = bindings
                        .iter()
                        .find(|(k, _)| k == name)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| TemplateError::Unbound {
                            template: self.id.clone(),
                            name: name.clone(),
                        })?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn expect_stage(&self, allowed: &[Stage]) -> Result<(), TemplateError> {
        if allowed.contains(&self.stage) {
            Ok(())
        } else {
            Err(TemplateError::WrongStage {
                template: self.id.clone(),
                expected: allowed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" or "),
                actual: self.stage,
            })
        }
    }
}

pub fn template_id(task: TaskKind, stage: Stage, variant: u8) -> String {
    format!("{}/{}/v{}", task.as_str(), stage.as_str(), variant)
}

fn asset_bytes(body: &str) -> Vec<u8> {
    let mut b = body.as_bytes().to_vec();
    b.push(b'\n');
    b
}

fn parse_segments(id: &str, body: &str) -> Result<Vec<Segment>, TemplateError> {
    let mut segments = Vec::new();
    let mut text = String::new();
    let mut rest = body;
    let mut offset = 0;
    while let Some(pos) = rest.find('[') {
        text.push_str(&rest[..pos]);
        let after = &rest[pos + 1..];
        if let Some(stripped) = after.strip_prefix('[') {
            text.push('[');
            offset += pos + 2;
            rest = stripped;
            continue;
        }
        let end = after.find(']').ok_or(TemplateError::Malformed {
            template: id.to_owned(),
            at: offset + pos,
        })?;
        let name = &after[..end];
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == ' ' || c == '_') {
            return Err(TemplateError::Malformed {
                template: id.to_owned(),
                at: offset + pos,
            });
        }
        if !text.is_empty() {
            segments.push(Segment::Text(std::mem::take(&mut text)));
        }
        segments.push(Segment::Slot(name.to_owned()));
        offset += pos + 1 + end + 1;
        rest = &after[end + 1..];
    }
    text.push_str(rest);
    if !text.is_empty() {
        segments.push(Segment::Text(text));
    }
    Ok(segments)
}

/// Returns every `[Name]` placeholder token left in `text` whose name is one
/// of `names`.
pub fn residual_placeholders<'a>(text: &str, names: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    names
        .into_iter()
        .map(|n| format!("[{n}]"))
        .filter(|tok| text.contains(tok.as_str()))
        .collect()
}

macro_rules! asset {
    ($task:literal, $stage:literal, $v:literal) => {
        (
            concat!($task, "/", $stage, "/v", $v, ".txt"),
            include_str!(concat!("../../templates/", $task, "/", $stage, "/v", $v, ".txt")),
        )
    };
}

const SHIPPED: &[(&str, &str)] = &[
    asset!("mner", "vanilla", 1),
    asset!("mner", "vanilla", 2),
    asset!("mner", "vanilla", 3),
    asset!("mner", "vanilla", 4),
    asset!("mner", "span_extraction", 1),
    asset!("mner", "choice_qa", 1),
    asset!("mner", "choice_qa", 2),
    asset!("mner", "choice_qa", 3),
    asset!("mner", "choice_qa", 4),
    asset!("mner", "text_vanilla", 1),
    asset!("mre", "vanilla", 1),
    asset!("mre", "vanilla", 2),
    asset!("mre", "vanilla", 3),
    asset!("mre", "vanilla", 4),
    asset!("mre", "choice_qa", 1),
    asset!("mre", "choice_qa", 2),
    asset!("mre", "choice_qa", 3),
    asset!("mre", "choice_qa", 4),
    asset!("mre", "text_vanilla", 1),
    asset!("mied", "vanilla", 1),
    asset!("mied", "vanilla", 2),
    asset!("mied", "vanilla", 3),
    asset!("mied", "vanilla", 4),
    asset!("mied", "choice_qa", 1),
    asset!("mied", "choice_qa", 2),
    asset!("mied", "choice_qa", 3),
    asset!("mied", "choice_qa", 4),
    asset!("mted", "vanilla", 1),
    asset!("mted", "vanilla", 2),
    asset!("mted", "vanilla", 3),
    asset!("mted", "vanilla", 4),
    asset!("mted", "ted_preprocess", 1),
    asset!("mted", "span_extraction", 1),
    asset!("mted", "choice_qa", 1),
    asset!("mted", "choice_qa", 2),
    asset!("mted", "choice_qa", 3),
    asset!("mted", "choice_qa", 4),
    asset!("mted", "text_vanilla", 1),
];

const SHIPPED_CHECKSUMS: &str = include_str!("../../templates/CHECKSUMS");

/// Checksums of the shipped assets keyed by relative path.
pub fn shipped_checksums() -> HashMap<&'static str, &'static str> {
    SHIPPED_CHECKSUMS
        .lines()
        .filter_map(|l| {
            let (sum, path) = l.split_once("  ")?;
            Some((path.trim(), sum.trim()))
        })
        .collect()
}

type Key = (TaskKind, Stage, u8);

/// All prompt templates, keyed by task, stage and instruction variant.
#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<Key, PromptTemplate>,
}

impl TemplateRegistry {
    /// The templates compiled into the library, verified against the shipped
    /// checksum list.
    pub fn builtin() -> Result<Self, TemplateError> {
        let sums = shipped_checksums();
        let mut templates = BTreeMap::new();
        for (rel, src) in SHIPPED {
            let t = parse_asset(rel, src)?;
            verify(&sums, rel, &t)?;
            templates.insert((t.task, t.stage, t.variant), t);
        }
        Ok(TemplateRegistry { templates })
    }

    /// Loads `<dir>/<task>/<stage>/v<n>.txt`. Files that shadow a shipped
    /// asset must match its checksum unless `allow_modified` is set.
    pub fn from_dir(dir: &Path, allow_modified: bool) -> Result<Self, TemplateError> {
        let sums = shipped_checksums();
        let mut templates = BTreeMap::new();
        let io = |p: &Path, e| TemplateError::Io {
            path: p.display().to_string(),
            source: e,
        };
        for task in TaskKind::ALL {
            for stage in Stage::ALL {
                let stage_dir = dir.join(task.as_str()).join(stage.as_str());
                if !stage_dir.is_dir() {
                    continue;
                }
                for v in 1..=4u8 {
                    let path = stage_dir.join(format!("v{v}.txt"));
                    if !path.is_file() {
                        continue;
                    }
                    let src = std::fs::read_to_string(&path).map_err(|e| io(&path, e))?;
                    let rel = format!("{}/{}/v{v}.txt", task.as_str(), stage.as_str());
                    let t = parse_asset(&rel, &src)?;
                    if !allow_modified {
                        verify(&sums, &rel, &t)?;
                    } else if sums.get(rel.as_str()).is_some_and(|s| *s != t.checksum) {
                        log::warn!("template {} differs from the shipped asset", t.id);
                    }
                    templates.insert((task, stage, v), t);
                }
            }
        }
        Ok(TemplateRegistry { templates })
    }

    /// Exact lookup, falling back to variant 1 for stages that have no
    /// published instruction variants.
    pub fn get(&self, task: TaskKind, stage: Stage, variant: u8) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .get(&(task, stage, variant))
            .or_else(|| self.templates.get(&(task, stage, 1)))
            .ok_or(TemplateError::NotFound { task, stage, variant })
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }

    pub fn checksums(&self) -> BTreeMap<String, String> {
        self.templates
            .values()
            .map(|t| (t.id.clone(), t.checksum.clone()))
            .collect()
    }
}

fn parse_asset(rel: &str, src: &str) -> Result<PromptTemplate, TemplateError> {
    let mut parts = rel.trim_end_matches(".txt").split('/');
    let bad = || TemplateError::Render(format!("bad template path `{rel}`"));
    let task: TaskKind = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let stage: Stage = parts.next().ok_or_else(bad)?.parse()?;
    let variant: u8 = parts
        .next()
        .and_then(|v| v.strip_prefix('v'))
        .and_then(|v| v.parse().ok())
        .filter(|v| (1..=4).contains(v))
        .ok_or_else(bad)?;
    let body = src.strip_suffix('\n').unwrap_or(src);
    PromptTemplate::parse(task, stage, variant, body)
}

fn verify(sums: &HashMap<&str, &str>, rel: &str, t: &PromptTemplate) -> Result<(), TemplateError> {
    match sums.get(rel) {
        Some(expected) if *expected != t.checksum => Err(TemplateError::FidelityMismatch { id: t.id.clone() }),
        _ => Ok(()),
    }
}
