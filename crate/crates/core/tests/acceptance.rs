//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::Zero;

use common::{fixtures, load, Recording};
use mqa_core::backends::{OracleBackend, OracleMode};
use mqa_core::evaluation::{aggregate_stats, evaluate_run, match_predictions, micro_f1, parse_decimal, Counts};
use mqa_core::experiment::{run_experiment, ExperimentConfig};
use mqa_core::pipeline::expected_calls;
use mqa_core::prompting::{
    build_option_set, build_preprocess_options, render_choice_qa, render_span_extraction, render_vanilla,
    OptionSubject,
};
use mqa_core::sampling::{med_split, proportional_counts};
use mqa_core::{
    Dataset, Gold, LabelSchema, LabeledSpan, Method, MieInstance, NotaPolicy, Payload, Pipeline, PipelineConfig,
    Prediction, Sentence, Span, Stage, TaskKind, TemplateFidelity, TemplateRegistry,
};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn run_task(
    task: TaskKind,
    mode: OracleMode,
    config: PipelineConfig,
) -> (LabelSchema, Dataset, mqa_core::pipeline::RunOutput) {
    let (schema, dataset) = load(task);
    let templates = TemplateRegistry::builtin().unwrap();
    let backend = OracleBackend::new(mode, schema.clone(), dataset.instances.clone());
    let out = Pipeline::new(&schema, &templates, &backend, config)
        .run(&dataset.instances, 4)
        .unwrap();
    (schema, dataset, out)
}

fn oracle_identity() -> Check {
    let started = Instant::now();
    let mut notes = Vec::new();
    for (task, method) in [
        (TaskKind::Mre, Method::Mqa),
        (TaskKind::Mied, Method::Mqa),
        (TaskKind::Mner, Method::MqaGoldSpan),
        (TaskKind::Mted, Method::MqaGoldSpan),
    ] {
        let (schema, dataset, out) = run_task(task, OracleMode::Gold, PipelineConfig::default().with_method(method));
        ensure!(dataset.instances.len() >= 50, "{task}: only {} instances", dataset.instances.len());
        let report = evaluate_run(&dataset.instances, &out.predictions, task, NotaPolicy::Exclude, &schema.nota.id)
            .map_err(|e| e.to_string())?;
        ensure!(report.counts.tp > 0, "{task}: no true positives");
        ensure!(report.metrics.f1 == Ratio::from_integer(1), "{task}: F1 {}", report.metrics.f1);
        notes.push(format!("{task} n={}", dataset.instances.len()));
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("F1 = 1 for {} in {elapsed:?}", notes.join(", ")))
}

fn nota_filtering() -> Check {
    for task in TaskKind::ALL {
        let (schema, dataset, out) = run_task(task, OracleMode::AlwaysNota, PipelineConfig::default());
        let items: usize = out.predictions.iter().map(|p| p.payload.len()).sum();
        ensure!(items == 0, "{task}: {items} payload items emitted");
        let report = evaluate_run(&dataset.instances, &out.predictions, task, NotaPolicy::Exclude, &schema.nota.id)
            .map_err(|e| e.to_string())?;
        ensure!(report.metrics.f1 == Ratio::from_integer(0), "{task}: F1 {}", report.metrics.f1);
        ensure!(report.counts.fn_ > 0, "{task}: gold has nothing to miss");
    }
    Ok("zero items and F1 = 0 on all four tasks".into())
}

/// Distinct surfaces kept by the extraction calls, in first-seen order.
fn extracted_candidates(trace: &mqa_core::StageTrace) -> usize {
    let mut seen = BTreeSet::new();
    trace
        .calls
        .iter()
        .filter(|c| c.stage == Stage::SpanExtraction)
        .flat_map(|c| c.spans.iter().flat_map(|s| s.kept.iter()))
        .filter(|s| seen.insert(s.as_str()))
        .count()
}

fn stage_plan() -> Check {
    let runs = [
        (TaskKind::Mre, Method::Mqa, OracleMode::Gold),
        (TaskKind::Mied, Method::Mqa, OracleMode::Gold),
        (TaskKind::Mner, Method::Mqa, OracleMode::Gold),
        (TaskKind::Mner, Method::Mqa, OracleMode::AlwaysNota),
        (TaskKind::Mner, Method::MqaGoldSpan, OracleMode::Gold),
        (TaskKind::Mted, Method::Mqa, OracleMode::Gold),
        (TaskKind::Mted, Method::Mqa, OracleMode::AlwaysNota),
        (TaskKind::Mted, Method::MqaGoldSpan, OracleMode::Gold),
    ];
    let mut checked = 0;
    for (task, method, mode) in runs {
        let (schema, dataset, out) = run_task(task, mode, PipelineConfig::default().with_method(method));
        let categories = schema.labels.len();
        for (inst, trace) in dataset.instances.iter().zip(&out.traces) {
            ensure!(inst.id == trace.instance_id, "trace order differs from instance order");
            let gold_surfaces: BTreeSet<&str> = inst.gold.spans().iter().map(|s| s.span.surface.as_str()).collect();
            let candidates = match method {
                Method::MqaGoldSpan => gold_surfaces.len(),
                _ => extracted_candidates(trace),
            };
            let calls = trace.calls.len();
            let (pre, ext, choice) = (
                trace.count(Stage::TedPreprocess),
                trace.count(Stage::SpanExtraction),
                trace.count(Stage::ChoiceQa),
            );
            let want = match (task, method) {
                (TaskKind::Mre | TaskKind::Mied, _) => (0, 0, 1),
                (_, Method::MqaGoldSpan) => (0, 0, candidates),
                (TaskKind::Mner, _) => (0, categories, candidates),
                (TaskKind::Mted, _) => (1, 1, candidates),
            };
            ensure!(
                calls == want.0 + want.1 + want.2 && (pre, ext, choice) == want,
                "{} ({task} {}): {calls} calls ({pre}/{ext}/{choice}), expected {want:?}",
                inst.id,
                method.as_str()
            );
            ensure!(
                calls == expected_calls(task, method, categories, candidates),
                "{}: expected_calls disagrees",
                inst.id
            );
            checked += 1;
        }
    }
    Ok(format!("{checked} instance traces conform"))
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn permutation_soundness() -> Check {
    let mut state = 0xA5A5_u64;
    let seeds: Vec<u64> = (0..20).map(|_| splitmix(&mut state)).collect();
    let templates = TemplateRegistry::builtin().unwrap();
    let mut prompts = 0;
    for task in TaskKind::ALL {
        let (schema, dataset) = load(task);
        let backend = Recording::new(OracleBackend::new(
            OracleMode::ContentAware,
            schema.clone(),
            dataset.instances.clone(),
        ));
        let mut baseline: Option<Vec<Prediction>> = None;
        let mut orders = HashSet::new();
        for &seed in &seeds {
            let config = PipelineConfig::default().with_option_seed(seed);
            let out = Pipeline::new(&schema, &templates, &backend, config)
                .run(&dataset.instances, 4)
                .map_err(|e| e.to_string())?;
            for req in backend.take() {
                let meta = req.meta.as_ref().ok_or("request without meta")?;
                let Some(options) = &meta.options else { continue };
                let map = options.decode_map();
                let labels: BTreeSet<&String> = map.values().collect();
                let letters: Vec<char> = map.keys().copied().collect();
                let expected_letters: Vec<char> = ('A'..).take(options.len()).collect();
                ensure!(
                    map.len() == options.len() && labels.len() == options.len() && letters == expected_letters,
                    "{}: decode map is not a bijection onto A..",
                    meta.instance_id
                );
                for o in options.options() {
                    ensure!(
                        options.letter_of(&o.label) == Some(o.letter) && options.decode(o.letter) == Some(o.label.as_str()),
                        "{}: letter/label round trip fails",
                        meta.instance_id
                    );
                    ensure!(req.prompt_text.contains(&o.line()), "{}: option line missing", meta.instance_id);
                }
                orders.insert(map.values().cloned().collect::<Vec<_>>());
                prompts += 1;
            }
            match &baseline {
                None => baseline = Some(out.predictions),
                Some(b) => ensure!(*b == out.predictions, "{task}: predictions differ under seed {seed}"),
            }
        }
        ensure!(orders.len() > 1, "{task}: option order never changed");
    }
    Ok(format!("{} seeds, {prompts} option prompts", seeds.len()))
}

fn statistics() -> Check {
    let anchors: [(&[&str], &str); 2] = [
        (&["61.6", "61.3", "61.3", "61.9"], "61.5 ± 0.3"),
        (&["62.6", "63.1", "62.0", "62.1"], "62.5 ± 0.5"),
    ];
    for (scores, expected) in anchors {
        let parsed: Vec<BigRational> = scores.iter().map(|s| parse_decimal(s).unwrap()).collect();
        let stats = aggregate_stats(&parsed).map_err(|e| e.to_string())?;
        ensure!(stats.display() == expected, "{scores:?} gave {}", stats.display());
        // floating point cross-check
        let xs: Vec<f64> = scores.iter().map(|s| s.parse().unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        ensure!(
            format!("{:.1} ± {:.1}", mean + 1e-9, var.sqrt() + 1e-9) == expected,
            "float cross-check disagrees for {scores:?}"
        );
    }
    Ok("both robustness rows reproduced".into())
}

fn max_matching(gold: &[(u8, u8)], pred: &[(u8, u8)], used: &mut Vec<bool>) -> u64 {
    let Some((g, rest)) = gold.split_first() else { return 0 };
    let mut best = max_matching(rest, pred, used);
    for j in 0..pred.len() {
        if !used[j] && pred[j] == *g {
            used[j] = true;
            best = best.max(1 + max_matching(rest, pred, used));
            used[j] = false;
        }
    }
    best
}

fn f1_oracle(tp: u64, fp: u64, fn_: u64) -> BigRational {
    let r = |n: u64, d: u64| {
        if d == 0 {
            BigRational::zero()
        } else {
            BigRational::new(BigInt::from(n), BigInt::from(d))
        }
    };
    let p = r(tp, tp + fp);
    let rc = r(tp, tp + fn_);
    if (&p + &rc).is_zero() {
        BigRational::zero()
    } else {
        BigRational::from_integer(BigInt::from(2)) * &p * &rc / (&p + &rc)
    }
}

fn as_big(r: Ratio<u64>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

const SURFACES: [&str; 3] = ["Paris", "Obama", "NASA"];
const LABELS: [&str; 2] = ["person", "location"];

fn random_items(state: &mut u64) -> Vec<(u8, u8)> {
    let n = splitmix(state) % 6;
    (0..n)
        .map(|_| ((splitmix(state) % 3) as u8, (splitmix(state) % 2) as u8))
        .collect()
}

fn spans(items: &[(u8, u8)]) -> Vec<LabeledSpan> {
    items
        .iter()
        .map(|&(s, l)| LabeledSpan::new(Span::new(SURFACES[s as usize]), LABELS[l as usize]))
        .collect()
}

fn metric_oracle() -> Check {
    let mut state = 7;
    let mut gold = Vec::new();
    let mut preds = Vec::new();
    let mut pooled = Counts::default();
    for i in 0..1000 {
        let g = random_items(&mut state);
        let p = random_items(&mut state);
        let tp = max_matching(&g, &p, &mut vec![false; p.len()]);
        let expect = Counts::new(tp, p.len() as u64 - tp, g.len() as u64 - tp);
        pooled += expect;
        let id = format!("r{i:04}");
        let inst = MieInstance {
            id: id.clone(),
            task: TaskKind::Mner,
            sentence: Sentence::new("Paris Obama NASA"),
            image: None,
            gold: Gold::Entities { entities: spans(&g) },
        };
        let pred = Prediction {
            id: id.clone(),
            task: TaskKind::Mner,
            payload: Payload::Entities(spans(&p)),
            provenance: vec![],
        };
        let single = match_predictions(
            std::slice::from_ref(&inst),
            std::slice::from_ref(&pred),
            TaskKind::Mner,
            NotaPolicy::Exclude,
            "nota",
        )
        .map_err(|e| e.to_string())?;
        ensure!(single.totals() == expect, "{id}: {:?} vs brute force {expect:?}", single.totals());
        let m = micro_f1(expect);
        ensure!(as_big(m.f1) == f1_oracle(expect.tp, expect.fp, expect.fn_), "{id}: F1 disagrees");
        gold.push(inst);
        preds.push(pred);
    }
    let all = match_predictions(&gold, &preds, TaskKind::Mner, NotaPolicy::Exclude, "nota").map_err(|e| e.to_string())?;
    ensure!(all.totals() == pooled, "pooled counts {:?} vs {pooled:?}", all.totals());
    ensure!(
        as_big(micro_f1(all.totals()).f1) == f1_oracle(pooled.tp, pooled.fp, pooled.fn_),
        "pooled F1 disagrees"
    );

    // single-label tasks under both NOTA policies
    let labels = ["r1", "r2", "nota"];
    for policy in [NotaPolicy::Exclude, NotaPolicy::Include] {
        let mut gold = Vec::new();
        let mut preds = Vec::new();
        let mut expect = Counts::default();
        for i in 0..1000 {
            let g = labels[(splitmix(&mut state) % 3) as usize];
            let p = match splitmix(&mut state) % 4 {
                3 => None,
                k => Some(labels[k as usize]),
            };
            let p_norm = p.unwrap_or("nota");
            expect += match policy {
                NotaPolicy::Exclude => {
                    let hit = g != "nota" && p_norm == g;
                    Counts::new(
                        hit as u64,
                        (p_norm != "nota" && p_norm != g) as u64,
                        (g != "nota" && p_norm != g) as u64,
                    )
                }
                NotaPolicy::Include => {
                    let hit = p_norm == g;
                    Counts::new(hit as u64, !hit as u64, !hit as u64)
                }
            };
            let id = format!("l{i:04}");
            gold.push(MieInstance {
                id: id.clone(),
                task: TaskKind::Mied,
                sentence: Sentence::new("caption"),
                image: Some(mqa_core::ImageRef::new("x.png")),
                gold: Gold::Event { event: g.into() },
            });
            preds.push(Prediction {
                id,
                task: TaskKind::Mied,
                payload: Payload::Event(p.map(str::to_owned)),
                provenance: vec![],
            });
        }
        let got = match_predictions(&gold, &preds, TaskKind::Mied, policy, "nota").map_err(|e| e.to_string())?;
        ensure!(got.totals() == expect, "{policy:?}: {:?} vs {expect:?}", got.totals());
    }
    Ok("1000 span instances and 2x1000 label instances agree".into())
}

/// Among all allocations with every count >= 1 summing to `k`, the one
/// closest to the ideal quotas in squared distance; ties go to the
/// allocation giving more to categories with larger frequency, then
/// smaller label.
fn brute_force_apportion(freqs: &BTreeMap<String, u64>, k: usize) -> BTreeMap<String, usize> {
    let cats: Vec<(&String, u64)> = freqs.iter().map(|(l, f)| (l, *f)).collect();
    let total: u64 = cats.iter().map(|c| c.1).sum();
    let mut pref: Vec<usize> = (0..cats.len()).collect();
    pref.sort_by(|&a, &b| cats[b].1.cmp(&cats[a].1).then(cats[a].0.cmp(cats[b].0)));

    fn compositions(n: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(n);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for first in 1..=n - (parts - 1) {
            cur.push(first);
            compositions(n - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    compositions(k, cats.len(), &mut Vec::new(), &mut all);
    let cost = |c: &[usize]| -> i128 {
        c.iter()
            .zip(&cats)
            .map(|(&ci, (_, f))| {
                let d = ci as i128 * total as i128 - k as i128 * *f as i128;
                d * d
            })
            .sum()
    };
    let best = all
        .into_iter()
        .min_by(|a, b| {
            cost(a).cmp(&cost(b)).then_with(|| {
                let ka: Vec<usize> = pref.iter().map(|&i| a[i]).collect();
                let kb: Vec<usize> = pref.iter().map(|&i| b[i]).collect();
                kb.cmp(&ka)
            })
        })
        .unwrap();
    cats.iter().zip(best).map(|((l, _), c)| ((*l).clone(), c)).collect()
}

fn sampler_contract() -> Check {
    let mut state = 99;
    for trial in 0..100 {
        let n = 1 + (splitmix(&mut state) % 6) as usize;
        let freqs: BTreeMap<String, u64> = (0..n).map(|i| (format!("c{i}"), 1 + splitmix(&mut state) % 60)).collect();
        let k = n + (splitmix(&mut state) % 15) as usize;
        let got = proportional_counts(&freqs, k).map_err(|e| e.to_string())?;
        ensure!(got.values().sum::<usize>() == k, "trial {trial}: sum is not {k}");
        ensure!(got.values().all(|&c| c >= 1), "trial {trial}: a category got 0");
        let want = brute_force_apportion(&freqs, k);
        ensure!(got == want, "trial {trial}: {freqs:?} k={k}: {got:?} vs {want:?}");
    }

    let ds = Dataset::load(&fixtures().join("datasets/mied_1000.jsonl")).map_err(|e| e.to_string())?;
    let split = med_split(&ds.instances, 50, 200, 13, "nota").map_err(|e| e.to_string())?;
    ensure!(
        (split.train.len(), split.val.len(), split.test.len()) == (50, 200, 750),
        "sizes {}/{}/{}",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    let mut union: Vec<&String> = split.train.iter().chain(&split.val).chain(&split.test).collect();
    union.sort();
    union.dedup();
    ensure!(union.len() == ds.instances.len(), "splits overlap or miss instances");
    Ok("100 frequency maps match; 50/200/750 partition".into())
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(fixtures().join("golden").join(format!("{name}_v1.txt"))).unwrap()
}

fn instance<'a>(ds: &'a Dataset, id: &str) -> &'a MieInstance {
    ds.instances.iter().find(|i| i.id == id).unwrap()
}

fn template_fidelity() -> Check {
    let reg = TemplateRegistry::builtin().unwrap();
    let t = |task, stage| reg.get(task, stage, 1).unwrap();
    let mut rendered: Vec<(&str, String)> = Vec::new();

    let (schema, ds) = load(TaskKind::Mner);
    let inst = instance(&ds, "mner-000");
    let opts = build_option_set(&schema, OptionSubject::Span("Kenya"), None, TemplateFidelity::Published).unwrap();
    rendered.push(("mner_vanilla", render_vanilla(t(TaskKind::Mner, Stage::Vanilla), inst, &schema, Some("person")).unwrap().text));
    rendered.push((
        "mner_span_extraction",
        render_span_extraction(t(TaskKind::Mner, Stage::SpanExtraction), inst, &schema, "person").unwrap().text,
    ));
    rendered.push(("mner_choice_qa", render_choice_qa(t(TaskKind::Mner, Stage::ChoiceQa), inst, &opts).unwrap().text));

    let (schema, ds) = load(TaskKind::Mre);
    let inst = instance(&ds, "mre-007");
    let opts = build_option_set(
        &schema,
        OptionSubject::Pair { head: "UNICEF", tail: "London" },
        Some(("org", "loc")),
        TemplateFidelity::Schema,
    )
    .unwrap();
    rendered.push(("mre_vanilla", render_vanilla(t(TaskKind::Mre, Stage::Vanilla), inst, &schema, None).unwrap().text));
    rendered.push(("mre_choice_qa", render_choice_qa(t(TaskKind::Mre, Stage::ChoiceQa), inst, &opts).unwrap().text));

    let (schema, ds) = load(TaskKind::Mied);
    let inst = &ds.instances[0];
    let opts = build_option_set(&schema, OptionSubject::Context, None, TemplateFidelity::Schema).unwrap();
    rendered.push(("mied_vanilla", render_vanilla(t(TaskKind::Mied, Stage::Vanilla), inst, &schema, None).unwrap().text));
    rendered.push(("mied_choice_qa", render_choice_qa(t(TaskKind::Mied, Stage::ChoiceQa), inst, &opts).unwrap().text));

    let (schema, ds) = load(TaskKind::Mted);
    let inst = instance(&ds, "mted-000");
    let pre = build_preprocess_options(&schema).unwrap();
    let opts = build_option_set(&schema, OptionSubject::Span("attacked"), None, TemplateFidelity::Schema).unwrap();
    rendered.push((
        "mted_vanilla",
        render_vanilla(t(TaskKind::Mted, Stage::Vanilla), inst, &schema, Some("conflict_attack")).unwrap().text,
    ));
    rendered.push((
        "mted_ted_preprocess",
        render_choice_qa(t(TaskKind::Mted, Stage::TedPreprocess), inst, &pre).unwrap().text,
    ));
    rendered.push((
        "mted_span_extraction",
        render_span_extraction(t(TaskKind::Mted, Stage::SpanExtraction), inst, &schema, "conflict_attack")
            .unwrap()
            .text,
    ));
    rendered.push(("mted_choice_qa", render_choice_qa(t(TaskKind::Mted, Stage::ChoiceQa), inst, &opts).unwrap().text));

    for (name, text) in &rendered {
        let expected = golden(name);
        ensure!(format!("{text}\n") == expected, "{name} differs:\n{text}\n--- expected ---\n{expected}");
    }
    Ok(format!("{} prompts byte-identical", rendered.len()))
}

fn cache_contract() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    for task in TaskKind::ALL {
        let mut cfg = ExperimentConfig::new(
            task,
            common::dataset_path(task),
            common::schema_name(task),
            "content-oracle",
        );
        cfg.option_seed = 5;
        cfg.cache_dir = Some(tmp.path().join("cache"));
        let read = |dir: &std::path::Path| -> Result<(Vec<u8>, Vec<u8>), String> {
            let r = |f: &str| std::fs::read(dir.join(f)).map_err(|e| e.to_string());
            Ok((r("predictions.jsonl")?, r("report.json")?))
        };
        cfg.output_dir = tmp.path().join(format!("{task}-first"));
        let first = run_experiment(&cfg).map_err(|e| e.to_string())?;
        ensure!(first.manifest.stats.backend_invocations > 0, "{task}: first run made no calls");
        let a = read(&cfg.output_dir)?;
        cfg.output_dir = tmp.path().join(format!("{task}-second"));
        let second = run_experiment(&cfg).map_err(|e| e.to_string())?;
        ensure!(
            second.manifest.stats.backend_invocations == 0,
            "{task}: rerun invoked the backend {} times",
            second.manifest.stats.backend_invocations
        );
        ensure!(second.manifest.stats.cache_hits == second.manifest.stats.requests, "{task}: cache misses on rerun");
        ensure!(read(&cfg.output_dir)? == a, "{task}: outputs differ on rerun");
    }
    Ok("reruns of all four tasks: 0 invocations, identical outputs".into())
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle identity", oracle_identity),
        ("NOTA filtering", nota_filtering),
        ("stage-plan conformance", stage_plan),
        ("permutation soundness", permutation_soundness),
        ("statistics reproduction", statistics),
        ("metric oracle equivalence", metric_oracle),
        ("sampler contract", sampler_contract),
        ("template fidelity", template_fidelity),
        ("cache contract", cache_contract),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
