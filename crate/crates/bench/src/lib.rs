//! Fixture loading shared by the benchmarks.

use std::path::PathBuf;

use mqa_core::{Dataset, LabelSchema, TaskKind};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Dataset and schema of the fixture corpus for `task`.
pub fn load(task: TaskKind) -> (LabelSchema, Dataset) {
    let name = match task {
        TaskKind::Mner => "mner",
        TaskKind::Mre => "mre",
        TaskKind::Mied => "mied",
        TaskKind::Mted => "mted",
    };
    let ds = Dataset::load(&fixture_dir().join(format!("datasets/{name}.jsonl"))).expect("fixture dataset");
    let schema = LabelSchema::resolve(&ds.header.schema).expect("fixture schema");
    (schema, ds)
}
