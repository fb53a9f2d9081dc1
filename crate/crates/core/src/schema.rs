//! Label universes, option wording and relation constraints per dataset.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{LabelId, TaskKind};

/// Where the NOTA option sits before any permutation is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NotaPosition {
    First,
    #[default]
    Last,
}

/// A label and its prompt wordings.
///
/// `option_text` may reference `{span}` (MNER/MTED candidates) or `{head}` and
/// `{tail}` (MRE relation templates).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDef {
    pub id: LabelId,
    pub display: String,
    pub option_text: String,
    /// Sentence-level description used by the MTED pre-process prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocess_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotaDef {
    pub id: LabelId,
    pub display: String,
    pub option_text: String,
    #[serde(default)]
    pub position: NotaPosition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeConstraint {
    pub head: String,
    pub tail: String,
    pub relations: Vec<LabelId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub id: String,
    pub version: u32,
    pub task: TaskKind,
    pub labels: Vec<LabelDef>,
    pub nota: NotaDef,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub type_constraints: Vec<TypeConstraint>,
    /// Typed labels listed in the published MNER option block; used when
    /// options are built with published fidelity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_labels: Option<Vec<LabelId>>,
    #[serde(default = "default_true")]
    pub span_case_sensitive: bool,
    #[serde(skip)]
    checksum: String,
}

fn default_true() -> bool {
    true
}

const BUILTIN: &[(&str, &str)] = &[
    ("twitter15", include_str!("../schemas/twitter15.json")),
    ("twitter17", include_str!("../schemas/twitter17.json")),
    ("mnre_v1", include_str!("../schemas/mnre_v1.json")),
    ("mnre_v2", include_str!("../schemas/mnre_v2.json")),
    ("m2e2_image", include_str!("../schemas/m2e2_image.json")),
    ("m2e2_text", include_str!("../schemas/m2e2_text.json")),
];

impl LabelSchema {
    pub fn builtin_ids() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(id, _)| *id)
    }

    pub fn builtin(id: &str) -> Result<Self> {
        let (_, src) = BUILTIN
            .iter()
            .find(|(name, _)| *name == id)
            .ok_or_else(|| Error::Config(format!("unknown built-in schema `{id}`")))?;
        Self::from_json_str(src)
    }

    /// Loads a schema from a file path, or a built-in schema by name when no
    /// such file exists.
    pub fn resolve(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.is_file() {
            Self::from_path(path)
        } else {
            Self::builtin(spec)
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&src)
    }

    pub fn from_json_str(src: &str) -> Result<Self> {
        let mut schema: LabelSchema =
            serde_json::from_str(src).map_err(|e| Error::json("label schema", e))?;
        schema.checksum = hex::encode(Sha256::digest(src.as_bytes()));
        schema.check()?;
        Ok(schema)
    }

    /// Hex SHA-256 of the source the schema was loaded from.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("schema `{}`: {msg}", self.id)));
        let mut ids = BTreeSet::new();
        for l in &self.labels {
            if !ids.insert(l.id.as_str()) {
                return bad(format!("duplicate label `{}`", l.id));
            }
        }
        if ids.contains(self.nota.id.as_str()) {
            return bad(format!("NOTA label `{}` is also a regular label", self.nota.id));
        }
        for c in &self.type_constraints {
            for r in &c.relations {
                if !ids.contains(r.as_str()) {
                    return bad(format!("constraint ({}, {}) names unknown relation `{r}`", c.head, c.tail));
                }
            }
        }
        if let Some(subset) = &self.published_labels {
            if let Some(l) = subset.iter().find(|l| !ids.contains(l.as_str())) {
                return bad(format!("published label `{l}` is not a label"));
            }
        }
        if self.task == TaskKind::Mted && self.labels.iter().any(|l| l.preprocess_text.is_none()) {
            return bad("every MTED label needs a preprocess_text".into());
        }
        Ok(())
    }

    pub fn label(&self, id: &str) -> Option<&LabelDef> {
        self.labels.iter().find(|l| l.id == id)
    }

    pub fn label_ids(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|l| l.id.as_str())
    }

    pub fn is_nota(&self, id: &str) -> bool {
        self.nota.id == id
    }

    /// True for regular labels and the NOTA label.
    pub fn is_known(&self, id: &str) -> bool {
        self.is_nota(id) || self.label(id).is_some()
    }

    pub fn display(&self, id: &str) -> Option<&str> {
        if self.is_nota(id) {
            Some(&self.nota.display)
        } else {
            self.label(id).map(|l| l.display.as_str())
        }
    }

    /// Relations admitted for an entity-type pair; empty when uncovered.
    pub fn relation_candidates(&self, head: &str, tail: &str) -> &[LabelId] {
        self.type_constraints
            .iter()
            .find(|c| c.head == head && c.tail == tail)
            .map(|c| c.relations.as_slice())
            .unwrap_or(&[])
    }

    /// Like [`relation_candidates`](Self::relation_candidates) but an
    /// uncovered pair is a configuration error.
    pub fn require_relation_candidates(&self, head: &str, tail: &str) -> Result<&[LabelId]> {
        let c = self.relation_candidates(head, tail);
        if c.is_empty() {
            Err(Error::MissingConstraint {
                head: head.to_owned(),
                tail: tail.to_owned(),
            })
        } else {
            Ok(c)
        }
    }
}
