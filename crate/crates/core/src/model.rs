//! Domain types shared by every stage of the harness.
//!
//! Offsets are counted in Unicode scalar values (`char`s), not bytes, so the
//! interchange files stay meaningful to tools in other languages.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::schema::LabelSchema;

pub type LabelId = String;

/// Fixed caption used as the sentence of image-centric event instances.
pub const IMAGE_CAPTION: &str = "This is an image attached to a news article.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Mner,
    Mre,
    Mied,
    Mted,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [TaskKind::Mner, TaskKind::Mre, TaskKind::Mied, TaskKind::Mted];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Mner => "mner",
            TaskKind::Mre => "mre",
            TaskKind::Mied => "mied",
            TaskKind::Mted => "mted",
        }
    }

    /// Tasks whose predictions are typed spans rather than a single label.
    pub fn is_span_task(self) -> bool {
        matches!(self, TaskKind::Mner | TaskKind::Mted)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_uppercase())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mner" => Ok(TaskKind::Mner),
            "mre" => Ok(TaskKind::Mre),
            "mied" => Ok(TaskKind::Mied),
            "mted" => Ok(TaskKind::Mted),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sentence {
    pub text: String,
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = text.split_whitespace().map(str::to_owned).collect();
        Sentence { text, tokens }
    }

    pub fn with_tokens(text: impl Into<String>, tokens: Vec<String>) -> Self {
        Sentence {
            text: text.into(),
            tokens,
        }
    }

    /// Char offset of the first occurrence of `needle`.
    pub fn find(&self, needle: &str) -> Option<usize> {
        find_char_offset(&self.text, needle, 0)
    }

    /// True when `span` occurs in the text, at its offset if it carries one.
    pub fn contains_span(&self, span: &Span) -> bool {
        if span.surface.is_empty() {
            return false;
        }
        match span.start {
            Some(start) => self
                .text
                .chars()
                .skip(start)
                .take(span.surface.chars().count())
                .eq(span.surface.chars()),
            None => self.text.contains(&span.surface),
        }
    }
}

impl<'de> Deserialize<'de> for Sentence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            text: String,
            #[serde(default)]
            tokens: Option<Vec<String>>,
        }
        let repr = Repr::deserialize(deserializer)?;
        Ok(match repr.tokens {
            Some(tokens) => Sentence::with_tokens(repr.text, tokens),
            None => Sentence::new(repr.text),
        })
    }
}

/// Char offset of `needle` in `haystack`, searching from char offset `from`.
pub fn find_char_offset(haystack: &str, needle: &str, from: usize) -> Option<usize> {
    let byte_from = haystack
        .char_indices()
        .nth(from)
        .map(|(b, _)| b)
        .unwrap_or(haystack.len());
    let byte = haystack[byte_from..].find(needle)? + byte_from;
    Some(haystack[..byte].chars().count())
}

/// Reference to an image file. The content hash is computed on first use and
/// then reused.
#[derive(Debug, Clone)]
pub struct ImageRef {
    uri: String,
    base_dir: Option<PathBuf>,
    hash: OnceLock<String>,
}

impl ImageRef {
    pub fn new(uri: impl Into<String>) -> Self {
        ImageRef {
            uri: uri.into(),
            base_dir: None,
            hash: OnceLock::new(),
        }
    }

    pub fn with_base_dir(mut self, base: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(base.into());
        self
    }

    pub fn uri(&self) -> &str {
        &self.uri
    }

    pub fn path(&self) -> PathBuf {
        let p = Path::new(&self.uri);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn read_bytes(&self) -> Result<Vec<u8>> {
        let path = self.path();
        std::fs::read(&path).map_err(|e| Error::io(path, e))
    }

    /// Hex SHA-256 of the image bytes.
    pub fn content_hash(&self) -> Result<String> {
        if let Some(h) = self.hash.get() {
            return Ok(h.clone());
        }
        let digest = hex::encode(Sha256::digest(self.read_bytes()?));
        Ok(self.hash.get_or_init(|| digest).clone())
    }
}

impl PartialEq for ImageRef {
    fn eq(&self, other: &Self) -> bool {
        self.uri == other.uri
    }
}

impl Eq for ImageRef {}

impl Serialize for ImageRef {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.uri)
    }
}

impl<'de> Deserialize<'de> for ImageRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d).map(ImageRef::new)
    }
}

/// A surface string, optionally anchored at a char offset in its sentence.
///
/// Serialized with `"start": -1` when the offset is unknown.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub surface: String,
    #[serde(with = "offset", default)]
    pub start: Option<usize>,
}

impl Span {
    pub fn new(surface: impl Into<String>) -> Self {
        Span {
            surface: surface.into(),
            start: None,
        }
    }

    pub fn at(surface: impl Into<String>, start: usize) -> Self {
        Span {
            surface: surface.into(),
            start: Some(start),
        }
    }
}

mod offset {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(n) => s.serialize_i64(*n as i64),
            None => s.serialize_i64(-1),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        let v = Option::<i64>::deserialize(d)?;
        Ok(v.filter(|n| *n >= 0).map(|n| n as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledSpan {
    #[serde(flatten)]
    pub span: Span,
    pub label: LabelId,
}

impl LabeledSpan {
    pub fn new(span: Span, label: impl Into<LabelId>) -> Self {
        LabeledSpan {
            span,
            label: label.into(),
        }
    }
}

/// Gold annotation; its shape is fixed by the task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gold {
    /// MNER: typed entity mentions.
    Entities { entities: Vec<LabeledSpan> },
    /// MRE: a head/tail pair and the relation between them (possibly NOTA).
    Relation {
        head: Span,
        head_type: String,
        tail: Span,
        tail_type: String,
        relation: LabelId,
    },
    /// MIED: the event the image depicts (possibly NOTA).
    Event { event: LabelId },
    /// MTED: typed trigger words.
    Triggers { triggers: Vec<LabeledSpan> },
}

impl Gold {
    pub fn task(&self) -> TaskKind {
        match self {
            Gold::Entities { .. } => TaskKind::Mner,
            Gold::Relation { .. } => TaskKind::Mre,
            Gold::Event { .. } => TaskKind::Mied,
            Gold::Triggers { .. } => TaskKind::Mted,
        }
    }

    pub fn spans(&self) -> &[LabeledSpan] {
        match self {
            Gold::Entities { entities } => entities,
            Gold::Triggers { triggers } => triggers,
            _ => &[],
        }
    }

    /// Single label for MRE/MIED gold.
    pub fn label(&self) -> Option<&str> {
        match self {
            Gold::Relation { relation, .. } => Some(relation),
            Gold::Event { event } => Some(event),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MieInstance {
    pub id: String,
    pub task: TaskKind,
    pub sentence: Sentence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
    pub gold: Gold,
}

/// Prediction payload; mirrors [`Gold`] with NOTA represented as absence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payload {
    Entities(Vec<LabeledSpan>),
    Relation(Option<LabelId>),
    Event(Option<LabelId>),
    Triggers(Vec<LabeledSpan>),
}

impl Payload {
    pub fn empty(task: TaskKind) -> Self {
        match task {
            TaskKind::Mner => Payload::Entities(Vec::new()),
            TaskKind::Mre => Payload::Relation(None),
            TaskKind::Mied => Payload::Event(None),
            TaskKind::Mted => Payload::Triggers(Vec::new()),
        }
    }

    pub fn task(&self) -> TaskKind {
        match self {
            Payload::Entities(_) => TaskKind::Mner,
            Payload::Relation(_) => TaskKind::Mre,
            Payload::Event(_) => TaskKind::Mied,
            Payload::Triggers(_) => TaskKind::Mted,
        }
    }

    pub fn spans(&self) -> &[LabeledSpan] {
        match self {
            Payload::Entities(v) | Payload::Triggers(v) => v,
            _ => &[],
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Payload::Relation(l) | Payload::Event(l) => l.as_deref(),
            _ => None,
        }
    }

    /// Number of asserted items.
    pub fn len(&self) -> usize {
        match self {
            Payload::Entities(v) | Payload::Triggers(v) => v.len(),
            Payload::Relation(l) | Payload::Event(l) => usize::from(l.is_some()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub task: TaskKind,
    #[serde(flatten)]
    pub payload: Payload,
    /// Template id of the prompt that decided each payload item, in item order.
    #[serde(default)]
    pub provenance: Vec<String>,
}

impl Prediction {
    pub fn empty(id: impl Into<String>, task: TaskKind) -> Self {
        Prediction {
            id: id.into(),
            task,
            payload: Payload::empty(task),
            provenance: Vec::new(),
        }
    }

    /// The prediction a perfect system would emit for `instance`.
    pub fn from_gold(instance: &MieInstance, nota: &str) -> Self {
        let keep = |l: &str| (l != nota).then(|| l.to_owned());
        let payload = match &instance.gold {
            Gold::Entities { entities } => Payload::Entities(entities.clone()),
            Gold::Triggers { triggers } => Payload::Triggers(triggers.clone()),
            Gold::Relation { relation, .. } => Payload::Relation(keep(relation)),
            Gold::Event { event } => Payload::Event(keep(event)),
        };
        let provenance = vec!["gold".to_owned(); payload.len()];
        Prediction {
            id: instance.id.clone(),
            task: instance.task,
            payload,
            provenance,
        }
    }
}

/// One broken invariant found by [`validate_instance`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: &'static str,
    pub detail: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: &'static str, detail: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            rule,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.field, self.rule, self.detail)
    }
}

pub mod rules {
    pub const TASK_MATCH: &str = "task-match";
    pub const GOLD_SHAPE: &str = "gold-shape";
    pub const NON_EMPTY_TEXT: &str = "non-empty-text";
    pub const SPAN_SUBSTRING: &str = "span-substring";
    pub const LABEL_KNOWN: &str = "label-known";
    pub const CONSTRAINT_COVERAGE: &str = "constraint-coverage";
    pub const IMAGE_REQUIRED: &str = "image-required";
    pub const UNIQUE_ID: &str = "unique-id";
}

/// Checks one instance against the type invariants; an empty list means valid.
pub fn validate_instance(instance: &MieInstance, schema: &LabelSchema) -> Vec<Violation> {
    let mut out = Vec::new();
    if instance.task != schema.task {
        out.push(Violation::new(
            "task",
            rules::TASK_MATCH,
            format!("instance is {} but schema `{}` is {}", instance.task, schema.id, schema.task),
        ));
    }
    if instance.gold.task() != instance.task {
        out.push(Violation::new(
            "gold",
            rules::GOLD_SHAPE,
            format!("gold annotation has {} shape", instance.gold.task()),
        ));
    }
    if instance.task != TaskKind::Mied && instance.sentence.text.trim().is_empty() {
        out.push(Violation::new("sentence.text", rules::NON_EMPTY_TEXT, "sentence is empty"));
    }
    if instance.task == TaskKind::Mied && instance.image.is_none() {
        out.push(Violation::new("image", rules::IMAGE_REQUIRED, "image-centric instance has no image"));
    }

    let check_span = |field: String, span: &Span, out: &mut Vec<Violation>| {
        if !instance.sentence.contains_span(span) {
            let at = span.start.map(|s| format!(" at offset {s}")).unwrap_or_default();
            out.push(Violation::new(
                field,
                rules::SPAN_SUBSTRING,
                format!("`{}`{at} does not occur in the sentence", span.surface),
            ));
        }
    };
    let check_label = |field: String, label: &str, out: &mut Vec<Violation>| {
        if !schema.is_known(label) {
            out.push(Violation::new(
                field,
                rules::LABEL_KNOWN,
                format!("label `{label}` is not in schema `{}`", schema.id),
            ));
        }
    };

    match &instance.gold {
        Gold::Entities { entities: spans } | Gold::Triggers { triggers: spans } => {
            let name = if matches!(instance.gold, Gold::Entities { .. }) { "entities" } else { "triggers" };
            for (i, ls) in spans.iter().enumerate() {
                check_span(format!("gold.{name}[{i}].surface"), &ls.span, &mut out);
                check_label(format!("gold.{name}[{i}].label"), &ls.label, &mut out);
            }
        }
        Gold::Relation {
            head,
            head_type,
            tail,
            tail_type,
            relation,
        } => {
            check_span("gold.head".into(), head, &mut out);
            check_span("gold.tail".into(), tail, &mut out);
            check_label("gold.relation".into(), relation, &mut out);
            let admitted = schema.relation_candidates(head_type, tail_type);
            if admitted.is_empty() {
                out.push(Violation::new(
                    "gold.head_type/gold.tail_type",
                    rules::CONSTRAINT_COVERAGE,
                    format!("no relation constraint for ({head_type}, {tail_type})"),
                ));
            } else if !schema.is_nota(relation) && schema.is_known(relation) && !admitted.contains(relation) {
                out.push(Violation::new(
                    "gold.relation",
                    rules::CONSTRAINT_COVERAGE,
                    format!("`{relation}` is not admitted for ({head_type}, {tail_type})"),
                ));
            }
        }
        Gold::Event { event } => check_label("gold.event".into(), event, &mut out),
    }
    out
}

/// Validates every instance and checks id uniqueness across the set.
pub fn validate_instances(instances: &[MieInstance], schema: &LabelSchema) -> Vec<(String, Violation)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for inst in instances {
        if !seen.insert(inst.id.as_str()) {
            out.push((
                inst.id.clone(),
                Violation::new("id", rules::UNIQUE_ID, format!("duplicate id `{}`", inst.id)),
            ));
        }
        out.extend(validate_instance(inst, schema).into_iter().map(|v| (inst.id.clone(), v)));
    }
    out
}
