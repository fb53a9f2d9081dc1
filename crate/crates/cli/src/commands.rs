use std::path::Path;

use mqa_core::dataset::{read_predictions, Dataset};
use mqa_core::evaluation::{evaluate_run, EvalReport};
use mqa_core::experiment::{robustness_from_scores, run_experiment, run_robustness, ExperimentConfig};
use mqa_core::sampling::{fewshot_sample, med_split, plan_for, write_split_file, SplitHeader};
use mqa_core::{Error, LabelSchema, Result, TemplateFidelity};

use crate::args::{EvalArgs, Fidelity, RobustnessArgs, RunArgs, SampleArgs, ValidateArgs};

fn missing(flag: &str) -> Error {
    Error::Config(format!("--{flag} is required without --config"))
}

fn experiment_config(a: RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(
            a.task.ok_or_else(|| missing("task"))?,
            a.dataset.clone().ok_or_else(|| missing("dataset"))?,
            a.schema.as_deref().ok_or_else(|| missing("schema"))?,
            a.backend.as_deref().ok_or_else(|| missing("backend"))?,
        ),
    };
    if let Some(v) = a.task {
        cfg.task = v;
    }
    if let Some(v) = a.dataset {
        cfg.dataset = v;
    }
    if let Some(v) = a.schema {
        cfg.schema = v;
    }
    if let Some(v) = a.backend {
        cfg.backend = v;
    }
    if let Some(v) = a.method {
        cfg.method = v;
    }
    if let Some(v) = a.variant {
        cfg.variant = v;
    }
    if let Some(v) = a.option_seed {
        cfg.option_seed = v;
    }
    if a.cache_dir.is_some() {
        cfg.cache_dir = a.cache_dir;
    }
    if let Some(v) = a.output_dir {
        cfg.output_dir = v;
    }
    if let Some(v) = a.concurrency {
        cfg.concurrency = v.max(1);
    }
    if let Some(v) = a.fidelity {
        cfg.fidelity = match v {
            Fidelity::Schema => TemplateFidelity::Schema,
            Fidelity::Published => TemplateFidelity::Published,
        };
    }
    if a.span_case_sensitive.is_some() {
        cfg.span_case_sensitive = a.span_case_sensitive;
    }
    if let Some(v) = a.max_new_tokens {
        cfg.max_new_tokens = v;
    }
    if let Some(v) = a.temperature {
        cfg.temperature = v;
    }
    if let Some(v) = a.nota_policy {
        cfg.nota_policy = v.into();
    }
    if a.lenient_transcript {
        cfg.transcript_strict = false;
    }
    if a.templates_dir.is_some() {
        cfg.templates_dir = a.templates_dir;
    }
    if a.record_transcript.is_some() {
        cfg.record_transcript = a.record_transcript;
    }
    Ok(cfg)
}

fn print_report(report: &EvalReport) {
    let d = &report.display;
    let c = report.counts.totals();
    println!(
        "{}  P {}  R {}  F1 {}  (tp {} fp {} fn {})",
        report.task, d.p, d.r, d.f1, c.tp, c.fp, c.fn_
    );
    for row in &report.per_class {
        println!("  {:<28} P {:>5}  R {:>5}  F1 {:>5}", row.label, row.display.p, row.display.r, row.display.f1);
    }
    if let Some(ti) = &report.trigger_identification {
        println!("  trigger identification       F1 {}", ti.display.f1);
    }
    if report.degenerate {
        println!("  warning: the gold set has no positive items");
    }
}

pub fn run(a: RunArgs) -> Result<()> {
    let cfg = experiment_config(a)?;
    let outcome = run_experiment(&cfg)?;
    print_report(&outcome.report);
    let s = &outcome.manifest.stats;
    println!(
        "{} requests, {} backend calls, {} cache hits, {} errored; outputs in {}",
        s.requests,
        s.backend_invocations,
        s.cache_hits,
        s.errored.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn schema_for(ds: &Dataset, name: Option<&str>) -> Result<LabelSchema> {
    LabelSchema::resolve(name.unwrap_or(&ds.header.schema))
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let ds = Dataset::load(&a.dataset)?;
    let schema = schema_for(&ds, a.schema.as_deref())?;
    let (header, predictions) = read_predictions(&a.predictions)?;
    if header.task != ds.task() {
        return Err(Error::Data(format!(
            "predictions are {} but the dataset is {}",
            header.task,
            ds.task()
        )));
    }
    let report = evaluate_run(&ds.instances, &predictions, ds.task(), a.nota_policy.into(), &schema.nota.id)?;
    print_report(&report);
    if let Some(out) = a.output {
        let body = serde_json::to_string_pretty(&report).map_err(|e| Error::json("report", e))?;
        std::fs::write(&out, body + "\n").map_err(|e| Error::io(&out, e))?;
    }
    Ok(())
}

pub fn robustness(a: RobustnessArgs) -> Result<()> {
    if !a.scores.is_empty() {
        let stats = robustness_from_scores(&a.scores)?;
        println!("F1 {}", stats.display());
        return Ok(());
    }
    let cfg = experiment_config(a.run)?;
    let report = run_robustness(&cfg, &a.variants, &a.seeds)?;
    print!("{}", report.table());
    Ok(())
}

fn write_ids(dir: &Path, name: &str, header: &SplitHeader, ids: &[String]) -> Result<()> {
    let path = dir.join(format!("{name}.ids"));
    write_split_file(&path, header, ids).map_err(|e| Error::io(&path, e))?;
    println!("{name}: {} ids -> {}", ids.len(), path.display());
    Ok(())
}

pub fn sample(a: SampleArgs) -> Result<()> {
    let ds = Dataset::load(&a.dataset)?;
    let schema = schema_for(&ds, a.schema.as_deref())?;
    ds.ensure_valid(&schema)?;
    let nota = &schema.nota.id;
    std::fs::create_dir_all(&a.output_dir).map_err(|e| Error::io(&a.output_dir, e))?;
    match a.val {
        None => {
            let plan = plan_for(&ds.instances, a.k, a.seed, nota)?;
            let ids = fewshot_sample(&ds.instances, &plan, nota)?;
            let header = SplitHeader::new("fewshot", a.seed, Some(plan), &ds.checksum, ids.len());
            write_ids(&a.output_dir, "fewshot", &header, &ids)
        }
        Some(n_val) => {
            let split = med_split(&ds.instances, a.k, n_val, a.seed, nota)?;
            let parts = [
                ("train", a.seed, Some(split.train_plan), &split.train),
                ("val", a.seed.wrapping_add(1), Some(split.val_plan), &split.val),
                ("test", a.seed, None, &split.test),
            ];
            for (name, seed, plan, ids) in parts {
                let header = SplitHeader::new(name, seed, plan, &ds.checksum, ids.len());
                write_ids(&a.output_dir, name, &header, ids)?;
            }
            Ok(())
        }
    }
}

pub fn validate(a: ValidateArgs) -> Result<()> {
    let ds = Dataset::load(&a.dataset)?;
    let schema = schema_for(&ds, a.schema.as_deref())?;
    let violations = ds.validate(&schema);
    for (id, v) in &violations {
        println!("{id}: {v}");
    }
    if violations.is_empty() {
        println!("{}: {} instances valid against {}", a.dataset.display(), ds.instances.len(), schema.id);
        Ok(())
    } else {
        Err(Error::Data(format!("{} violations", violations.len())))
    }
}
