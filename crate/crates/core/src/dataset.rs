//! Line-delimited JSON datasets and prediction files.
//!
//! Both formats start with a header line naming the format, the schema id and
//! the task; every following non-blank line is one record.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{validate_instances, MieInstance, Prediction, TaskKind, Violation};
use crate::schema::LabelSchema;

pub const DATASET_FORMAT: &str = "mqa-dataset";
pub const PREDICTIONS_FORMAT: &str = "mqa-predictions";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHeader {
    pub format: String,
    pub version: u32,
    pub schema: String,
    pub task: TaskKind,
}

impl FileHeader {
    pub fn new(format: &str, schema: &str, task: TaskKind) -> Self {
        FileHeader {
            format: format.into(),
            version: 1,
            schema: schema.into(),
            task,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: FileHeader,
    pub instances: Vec<MieInstance>,
    /// Hex SHA-256 of the bytes the dataset was read from.
    pub checksum: String,
}

fn parse_lines<T: DeserializeOwned>(src: &str, origin: &str, format: &str) -> Result<(FileHeader, Vec<T>)> {
    let mut lines = src.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{origin}: empty file")))?;
    let header: FileHeader =
        serde_json::from_str(first).map_err(|e| Error::json(format!("{origin}: header"), e))?;
    if header.format != format {
        return Err(Error::Data(format!(
            "{origin}: expected format `{format}`, found `{}`",
            header.format
        )));
    }
    if header.version != 1 {
        return Err(Error::Data(format!("{origin}: unsupported version {}", header.version)));
    }
    let records = lines
        .map(|(n, line)| serde_json::from_str(line).map_err(|e| Error::json(format!("{origin}:{}", n + 1), e)))
        .collect::<Result<Vec<T>>>()?;
    Ok((header, records))
}

fn to_lines<T: Serialize>(header: &FileHeader, records: &[T]) -> String {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

fn write_atomic(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Dataset {
    pub fn new(schema: &str, task: TaskKind, instances: Vec<MieInstance>) -> Self {
        let mut ds = Dataset {
            header: FileHeader::new(DATASET_FORMAT, schema, task),
            instances,
            checksum: String::new(),
        };
        ds.checksum = sha256_hex(ds.to_jsonl().as_bytes());
        ds
    }

    /// Reads a dataset; relative image paths resolve against `base_dir`.
    pub fn from_jsonl_str(src: &str, base_dir: Option<&Path>) -> Result<Self> {
        let (header, mut instances): (FileHeader, Vec<MieInstance>) = parse_lines(src, "dataset", DATASET_FORMAT)?;
        for inst in &mut instances {
            if inst.task != header.task {
                return Err(Error::Data(format!(
                    "instance `{}` is {} in a {} dataset",
                    inst.id, inst.task, header.task
                )));
            }
            if let Some(base) = base_dir {
                inst.image = inst.image.take().map(|img| img.with_base_dir(base));
            }
        }
        Ok(Dataset {
            header,
            instances,
            checksum: sha256_hex(src.as_bytes()),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_jsonl_str(&src, Some(&base))
            .map_err(|e| match e {
                Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
                other => other,
            })
    }

    pub fn task(&self) -> TaskKind {
        self.header.task
    }

    pub fn to_jsonl(&self) -> String {
        to_lines(&self.header, &self.instances)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_jsonl())
    }

    pub fn validate(&self, schema: &LabelSchema) -> Vec<(String, Violation)> {
        validate_instances(&self.instances, schema)
    }

    /// Errors with the first few violations when the dataset is invalid.
    pub fn ensure_valid(&self, schema: &LabelSchema) -> Result<()> {
        if self.header.task != schema.task {
            return Err(Error::Config(format!(
                "dataset is {} but schema `{}` is {}",
                self.header.task, schema.id, schema.task
            )));
        }
        let violations = self.validate(schema);
        if violations.is_empty() {
            return Ok(());
        }
        let shown: Vec<String> = violations.iter().take(5).map(|(id, v)| format!("{id}: {v}")).collect();
        Err(Error::Data(format!(
            "{} violation(s); first: {}",
            violations.len(),
            shown.join("; ")
        )))
    }
}

/// Predictions sorted by id, preceded by a header.
pub fn predictions_to_jsonl(schema: &str, task: TaskKind, predictions: &[Prediction]) -> String {
    let mut sorted: Vec<&Prediction> = predictions.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    to_lines(&FileHeader::new(PREDICTIONS_FORMAT, schema, task), &sorted)
}

pub fn write_predictions(path: &Path, schema: &str, task: TaskKind, predictions: &[Prediction]) -> Result<()> {
    write_atomic(path, &predictions_to_jsonl(schema, task, predictions))
}

pub fn read_predictions(path: &Path) -> Result<(FileHeader, Vec<Prediction>)> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lines(&src, &path.display().to_string(), PREDICTIONS_FORMAT)
}

pub(crate) fn write_text(path: &Path, body: &str) -> Result<()> {
    write_atomic(path, body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Gold, LabeledSpan, Sentence, Span};

    fn sample() -> Dataset {
        Dataset::new(
            "twitter17",
            TaskKind::Mner,
            vec![MieInstance {
                id: "1".into(),
                task: TaskKind::Mner,
                sentence: Sentence::new("Obama in Paris"),
                image: Some(crate::model::ImageRef::new("img/1.png")),
                gold: Gold::Entities {
                    entities: vec![LabeledSpan::new(Span::at("Paris", 9), "location")],
                },
            }],
        )
    }

    #[test]
    fn round_trip() {
        let ds = sample();
        let back = Dataset::from_jsonl_str(&ds.to_jsonl(), None).unwrap();
        assert_eq!(back.instances, ds.instances);
        assert_eq!(back.header, ds.header);
        assert_eq!(back.checksum, ds.checksum);
    }

    #[test]
    fn image_paths_resolve_against_base() {
        let ds = Dataset::from_jsonl_str(&sample().to_jsonl(), Some(Path::new("/data/set"))).unwrap();
        assert_eq!(ds.instances[0].image.as_ref().unwrap().path(), Path::new("/data/set/img/1.png"));
    }

    #[test]
    fn wrong_format_or_task_is_rejected() {
        let src = sample().to_jsonl().replace("mqa-dataset", "other");
        assert!(Dataset::from_jsonl_str(&src, None).is_err());
        let src = sample().to_jsonl().replacen("\"mner\"", "\"mre\"", 1);
        assert!(Dataset::from_jsonl_str(&src, None).is_err());
    }

    #[test]
    fn predictions_are_sorted() {
        let preds = vec![Prediction::empty("b", TaskKind::Mre), Prediction::empty("a", TaskKind::Mre)];
        let text = predictions_to_jsonl("mnre_v2", TaskKind::Mre, &preds);
        let ids: Vec<_> = text.lines().skip(1).map(|l| l.split('"').nth(3).unwrap().to_owned()).collect();
        assert_eq!(ids, ["a", "b"]);
    }
}
