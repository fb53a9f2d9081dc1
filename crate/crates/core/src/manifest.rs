//! Run diagnostics and the replayable run manifest.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::parsing::ParseMethod;
use crate::pipeline::StageTrace;

/// Parser counters. Deterministic for a fixed backend transcript.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub dropped_spans: u64,
    pub failed_parses: u64,
    pub parse_methods: BTreeMap<String, u64>,
}

impl ParseDiagnostics {
    pub fn record_method(&mut self, method: ParseMethod) {
        *self.parse_methods.entry(method.as_str().to_owned()).or_default() += 1;
        if method == ParseMethod::Failed {
            self.failed_parses += 1;
        }
    }

    pub fn merge(&mut self, other: &ParseDiagnostics) {
        self.dropped_spans += other.dropped_spans;
        self.failed_parses += other.failed_parses;
        for (k, v) in &other.parse_methods {
            *self.parse_methods.entry(k.clone()).or_default() += v;
        }
    }
}

/// Backend-side counters; these vary with cache state and timing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    /// Calls issued by the pipeline.
    pub requests: u64,
    /// Calls that reached the underlying backend (cache misses).
    pub backend_invocations: u64,
    pub cache_hits: u64,
    pub retries: u64,
    pub attempted: usize,
    pub errored: Vec<String>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecksumEntry {
    pub id: String,
    pub version: u32,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    /// The experiment configuration exactly as run.
    pub config: serde_json::Value,
    pub schema: ChecksumEntry,
    pub dataset_sha256: String,
    pub template_checksums: BTreeMap<String, String>,
    pub diagnostics: ParseDiagnostics,
    pub stats: RunStats,
    pub started_unix_ms: u64,
    pub traces: Vec<StageTrace>,
}

impl RunManifest {
    pub const FORMAT: &'static str = "mqa-run-manifest";
}
