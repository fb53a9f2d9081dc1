//! End-to-end runs: load inputs, build the backend stack, run the pipeline,
//! score, and persist outputs.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::backends::{
    Backend, CachedBackend, CountingBackend, Decoding, OracleBackend, OracleMode, RemoteBackend, RemoteConfig,
    TextOnly, TranscriptBackend, TranscriptRecorder,
};
use crate::dataset::{predictions_to_jsonl, write_text, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate_stats, evaluate_run, parse_decimal, AggregateStats, Counts, EvalReport, MetricsRow, NotaPolicy,
};
use crate::manifest::{ChecksumEntry, RunManifest, RunStats};
use crate::model::{MieInstance, Prediction, TaskKind};
use crate::pipeline::{Method, Pipeline, PipelineConfig, RunOutput};
use crate::prompting::{TemplateFidelity, TemplateRegistry};
use crate::schema::LabelSchema;

/// Where generations come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    /// `oracle`: answers with the gold option letter.
    Oracle,
    /// `content-oracle`: answers by finding the gold option's wording.
    ContentOracle,
    /// `always-nota`: extracts gold spans, rejects every candidate.
    AlwaysNota,
    /// `transcript:PATH`: replays recorded generations.
    Transcript(PathBuf),
    /// `remote:PATH`: chat-completions endpoint configured by a TOML file.
    Remote(PathBuf),
    /// `text-only:SPEC`: presents the inner backend as text-only.
    TextOnly(Box<BackendSpec>),
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "oracle" => BackendSpec::Oracle,
            "content-oracle" => BackendSpec::ContentOracle,
            "always-nota" => BackendSpec::AlwaysNota,
            _ => match s.split_once(':') {
                Some(("transcript", p)) => BackendSpec::Transcript(p.into()),
                Some(("remote", p)) => BackendSpec::Remote(p.into()),
                Some(("text-only", inner)) => BackendSpec::TextOnly(Box::new(inner.parse()?)),
                _ => {
                    return Err(Error::Config(format!(
                        "unknown backend `{s}` (oracle, content-oracle, always-nota, transcript:PATH, remote:PATH, text-only:SPEC)"
                    )))
                }
            },
        })
    }
}

impl BackendSpec {
    fn resolve(self, base: &Path) -> Self {
        match self {
            BackendSpec::Transcript(p) => BackendSpec::Transcript(base.join(p)),
            BackendSpec::Remote(p) => BackendSpec::Remote(base.join(p)),
            BackendSpec::TextOnly(inner) => BackendSpec::TextOnly(Box::new(inner.resolve(base))),
            other => other,
        }
    }

    pub fn build(&self, schema: &LabelSchema, instances: &[MieInstance], strict: bool) -> Result<Box<dyn Backend>> {
        let oracle = |mode| Box::new(OracleBackend::new(mode, schema.clone(), instances.iter().cloned()));
        Ok(match self {
            BackendSpec::Oracle => oracle(OracleMode::Gold),
            BackendSpec::ContentOracle => oracle(OracleMode::ContentAware),
            BackendSpec::AlwaysNota => oracle(OracleMode::AlwaysNota),
            BackendSpec::Transcript(p) => Box::new(TranscriptBackend::load(p, strict)?),
            BackendSpec::Remote(p) => Box::new(RemoteBackend::new(load_remote_config(p)?)?),
            BackendSpec::TextOnly(inner) => Box::new(TextOnly(inner.build(schema, instances, strict)?)),
        })
    }
}

pub fn load_remote_config(path: &Path) -> Result<RemoteConfig> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&src).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn default_variant() -> u8 {
    1
}
fn default_concurrency() -> usize {
    4
}
fn default_max_new_tokens() -> u32 {
    64
}
fn default_true() -> bool {
    true
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub dataset: PathBuf,
    /// Schema file path or built-in schema name.
    pub schema: String,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_variant")]
    pub variant: u8,
    #[serde(default)]
    pub option_seed: u64,
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub fidelity: TemplateFidelity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_case_sensitive: Option<bool>,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub nota_policy: NotaPolicy,
    /// Missing transcript entries are errors rather than empty answers.
    #[serde(default = "default_true")]
    pub transcript_strict: bool,
    /// Template directory replacing the built-in assets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
    /// Appends every answered request to this transcript file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_transcript: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(task: TaskKind, dataset: impl Into<PathBuf>, schema: &str, backend: &str) -> Self {
        ExperimentConfig {
            task,
            dataset: dataset.into(),
            schema: schema.into(),
            method: Method::Mqa,
            variant: 1,
            option_seed: 0,
            backend: backend.into(),
            cache_dir: None,
            output_dir: default_output_dir(),
            concurrency: default_concurrency(),
            fidelity: TemplateFidelity::Schema,
            span_case_sensitive: None,
            max_new_tokens: default_max_new_tokens(),
            temperature: 0.0,
            nota_policy: NotaPolicy::Exclude,
            transcript_strict: true,
            templates_dir: None,
            record_transcript: None,
        }
    }

    /// Parses TOML; relative paths resolve against `base`.
    pub fn from_toml_str(src: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(src).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.dataset = base.join(&cfg.dataset);
        cfg.output_dir = base.join(&cfg.output_dir);
        cfg.cache_dir = cfg.cache_dir.map(|p| base.join(p));
        cfg.templates_dir = cfg.templates_dir.map(|p| base.join(p));
        cfg.record_transcript = cfg.record_transcript.map(|p| base.join(p));
        if Path::new(&cfg.schema).extension().is_some() {
            cfg.schema = base.join(&cfg.schema).display().to_string();
        }
        cfg.backend = match cfg.backend.parse::<BackendSpec>()?.resolve(base) {
            BackendSpec::Transcript(p) => format!("transcript:{}", p.display()),
            BackendSpec::Remote(p) => format!("remote:{}", p.display()),
            _ => cfg.backend,
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&src, &base)
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            method: self.method,
            variant: self.variant,
            option_seed: self.option_seed,
            decoding: Decoding {
                greedy: self.temperature == 0.0,
                temperature: self.temperature,
                max_new_tokens: self.max_new_tokens,
                stop: Vec::new(),
            },
            span_case_sensitive: self.span_case_sensitive,
            fidelity: self.fidelity,
        }
    }
}

/// Loaded inputs and a backend stack shared by one or more runs.
pub struct Session {
    pub config: ExperimentConfig,
    pub schema: LabelSchema,
    pub dataset: Dataset,
    pub templates: TemplateRegistry,
    backend: Box<dyn Backend>,
    invocations: Arc<AtomicUsize>,
}

impl Session {
    pub fn open(config: &ExperimentConfig) -> Result<Self> {
        let schema = LabelSchema::resolve(&config.schema)?;
        if schema.task != config.task {
            return Err(Error::Config(format!(
                "schema `{}` is {} but the experiment is {}",
                schema.id, schema.task, config.task
            )));
        }
        config.pipeline_config().validate(config.task)?;
        let dataset = Dataset::load(&config.dataset)?;
        if dataset.task() != config.task {
            return Err(Error::Config(format!(
                "dataset is {} but the experiment is {}",
                dataset.task(),
                config.task
            )));
        }
        dataset.ensure_valid(&schema)?;
        let templates = match &config.templates_dir {
            Some(dir) => TemplateRegistry::from_dir(dir, false)?,
            None => TemplateRegistry::builtin()?,
        };
        let spec: BackendSpec = config.backend.parse()?;
        let counting = CountingBackend::new(spec.build(&schema, &dataset.instances, config.transcript_strict)?);
        let invocations = counting.counter();
        let backend: Box<dyn Backend> = match &config.cache_dir {
            Some(dir) => Box::new(CachedBackend::new(counting, dir)?),
            None => Box::new(counting),
        };
        // outermost, so cache hits are recorded too
        let backend: Box<dyn Backend> = match &config.record_transcript {
            Some(path) => Box::new(TranscriptRecorder::new(backend, path)?),
            None => backend,
        };
        Ok(Session {
            config: config.clone(),
            schema,
            dataset,
            templates,
            backend,
            invocations,
        })
    }

    /// Calls that reached the underlying backend so far.
    pub fn backend_invocations(&self) -> usize {
        self.invocations.load(Ordering::SeqCst)
    }

    pub fn run(&self, pipeline: PipelineConfig) -> Result<(RunOutput, EvalReport)> {
        let p = Pipeline::new(&self.schema, &self.templates, self.backend.as_ref(), pipeline);
        let out = p.run(&self.dataset.instances, self.config.concurrency)?;
        let report = evaluate_run(
            &self.dataset.instances,
            &out.predictions,
            self.config.task,
            self.config.nota_policy,
            &self.schema.nota.id,
        )?
        .with_diagnostics(out.diagnostics.clone());
        Ok((out, report))
    }
}

pub struct ExperimentOutcome {
    pub manifest: RunManifest,
    pub predictions: Vec<Prediction>,
    pub report: EvalReport,
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

/// Runs one configuration and writes `predictions.jsonl`, `report.json` and
/// `manifest.json` into the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let started = unix_ms();
    let clock = Instant::now();
    let session = Session::open(config)?;
    let before = session.backend_invocations();
    let (out, report) = session.run(config.pipeline_config())?;
    let invocations = (session.backend_invocations() - before) as u64;
    let stats = RunStats {
        requests: out.requests,
        backend_invocations: invocations,
        cache_hits: out.requests.saturating_sub(invocations),
        retries: out.retries,
        attempted: session.dataset.instances.len() - out.errored.len(),
        errored: out.errored.clone(),
        wall_ms: clock.elapsed().as_millis() as u64,
    };
    let manifest = RunManifest {
        format: RunManifest::FORMAT.into(),
        version: 1,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(config).map_err(|e| Error::json("experiment config", e))?,
        schema: ChecksumEntry {
            id: session.schema.id.clone(),
            version: session.schema.version,
            sha256: session.schema.checksum().to_owned(),
        },
        dataset_sha256: session.dataset.checksum.clone(),
        template_checksums: session.templates.checksums(),
        diagnostics: out.diagnostics.clone(),
        stats,
        started_unix_ms: started,
        traces: out.traces,
    };
    let dir = &config.output_dir;
    write_text(
        &dir.join("predictions.jsonl"),
        &predictions_to_jsonl(&session.schema.id, config.task, &out.predictions),
    )?;
    write_text(&dir.join("report.json"), &to_json(&report))?;
    write_text(&dir.join("manifest.json"), &to_json(&manifest))?;
    log::info!(
        "{} requests, {} backend invocations, {} errored",
        manifest.stats.requests,
        manifest.stats.backend_invocations,
        manifest.stats.errored.len()
    );
    Ok(ExperimentOutcome {
        manifest,
        predictions: out.predictions,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RobustnessRow {
    pub variant: u8,
    pub option_seed: u64,
    pub counts: Counts,
    pub display: MetricsRow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RobustnessReport {
    pub rows: Vec<RobustnessRow>,
    pub f1: AggregateStats,
    pub summary: String,
}

impl RobustnessReport {
    fn from_parts(rows: Vec<RobustnessRow>, f1: AggregateStats) -> Self {
        RobustnessReport {
            summary: f1.display(),
            rows,
            f1,
        }
    }

    /// Plain-text table: one row per run, then the F1 mean and deviation.
    pub fn table(&self) -> String {
        let mut out = format!("{:<8} {:<6} {:>6} {:>6} {:>6}\n", "variant", "seed", "P", "R", "F1");
        for r in &self.rows {
            out.push_str(&format!(
                "{:<8} {:<6} {:>6} {:>6} {:>6}\n",
                r.variant, r.option_seed, r.display.p, r.display.r, r.display.f1
            ));
        }
        out.push_str(&format!("F1 {}\n", self.summary));
        out
    }
}

/// Runs every (variant, option seed) combination and aggregates F1.
pub fn run_robustness(config: &ExperimentConfig, variants: &[u8], seeds: &[u64]) -> Result<RobustnessReport> {
    let runs = variants.len() * seeds.len();
    if runs < 2 {
        return Err(crate::evaluation::EvalError::TooFewScores(runs).into());
    }
    let session = Session::open(config)?;
    let mut rows = Vec::with_capacity(runs);
    let mut scores = Vec::with_capacity(runs);
    for &variant in variants {
        for &seed in seeds {
            let pc = PipelineConfig {
                variant,
                option_seed: seed,
                ..config.pipeline_config()
            };
            let (_, report) = session.run(pc)?;
            let f1 = report.metrics.f1;
            scores.push(BigRational::new(
                BigInt::from(*f1.numer()) * 100,
                BigInt::from(*f1.denom()),
            ));
            rows.push(RobustnessRow {
                variant,
                option_seed: seed,
                counts: report.counts.totals(),
                display: report.display,
            });
        }
    }
    let report = RobustnessReport::from_parts(rows, aggregate_stats(&scores)?);
    write_text(&config.output_dir.join("robustness.json"), &to_json(&report))?;
    Ok(report)
}

/// Aggregates already-recorded percent scores such as `61.6`.
pub fn robustness_from_scores(scores: &[String]) -> Result<AggregateStats> {
    let parsed = scores.iter().map(|s| parse_decimal(s)).collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(aggregate_stats(&parsed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_specs_parse() {
        assert_eq!("oracle".parse::<BackendSpec>().unwrap(), BackendSpec::Oracle);
        assert_eq!(
            "transcript:a/b.jsonl".parse::<BackendSpec>().unwrap(),
            BackendSpec::Transcript("a/b.jsonl".into())
        );
        assert_eq!(
            "text-only:oracle".parse::<BackendSpec>().unwrap(),
            BackendSpec::TextOnly(Box::new(BackendSpec::Oracle))
        );
        assert!("gpt".parse::<BackendSpec>().is_err());
    }

    #[test]
    fn toml_paths_resolve_against_config_dir() {
        let src = r#"
            task = "mre"
            dataset = "data/mre.jsonl"
            schema = "mnre_v2"
            backend = "transcript:t.jsonl"
            cache_dir = "cache"
        "#;
        let cfg = ExperimentConfig::from_toml_str(src, Path::new("/exp")).unwrap();
        assert_eq!(cfg.dataset, Path::new("/exp/data/mre.jsonl"));
        assert_eq!(cfg.cache_dir.as_deref(), Some(Path::new("/exp/cache")));
        assert_eq!(cfg.backend, "transcript:/exp/t.jsonl");
        assert_eq!(cfg.schema, "mnre_v2");
        assert_eq!((cfg.variant, cfg.method), (1, Method::Mqa));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let src = "task = \"mre\"\ndataset = \"d\"\nschema = \"s\"\nbackend = \"oracle\"\nbogus = 1\n";
        assert!(ExperimentConfig::from_toml_str(src, Path::new(".")).is_err());
    }

    #[test]
    fn recorded_scores_aggregate() {
        let s = robustness_from_scores(&["61.6", "61.3", "61.3", "61.9"].map(String::from)).unwrap();
        assert_eq!(s.display(), "61.5 ± 0.3");
    }
}
