use rayon::prelude::*;

use super::config::{Method, PipelineConfig};
use super::trace::{ParsedLabel, ParsedSpans, StageCall, StageTrace};
use crate::backends::{Backend, GenerationRequest, Modality, RequestMeta};
use crate::error::{Error, Result};
use crate::manifest::ParseDiagnostics;
use crate::model::{Gold, LabelId, LabeledSpan, MieInstance, Payload, Prediction, Span, TaskKind};
use crate::parsing::{parse_choice, parse_span_list, parse_vanilla_label, ParseOutcome};
use crate::prompting::{
    build_option_set, build_preprocess_options, permute_option_set, render_choice_qa, render_span_extraction,
    render_vanilla, OptionSet, OptionSubject, RenderedPrompt, Stage, TemplateRegistry,
};
use crate::schema::LabelSchema;

/// Drops candidates labelled NOTA, keeping order.
pub fn filter_nota<T>(candidates: Vec<(T, LabelId)>, nota: &str) -> Vec<(T, LabelId)> {
    candidates.into_iter().filter(|(_, label)| label != nota).collect()
}

/// Result of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRun {
    pub prediction: Prediction,
    pub trace: StageTrace,
    pub diagnostics: ParseDiagnostics,
    pub requests: u64,
    pub retries: u64,
    pub errored: bool,
}

/// Results of a dataset run, sorted by instance id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub predictions: Vec<Prediction>,
    pub traces: Vec<StageTrace>,
    pub diagnostics: ParseDiagnostics,
    pub requests: u64,
    pub retries: u64,
    pub errored: Vec<String>,
}

struct Ctx<'i> {
    inst: &'i MieInstance,
    trace: StageTrace,
    diag: ParseDiagnostics,
    requests: u64,
    retries: u64,
}

impl Ctx<'_> {
    fn last(&mut self) -> &mut StageCall {
        self.trace.calls.last_mut().expect("a call was just recorded")
    }

    fn note_label(&mut self, outcome: &ParseOutcome) {
        self.diag.record_method(outcome.method);
        self.last().label = Some(ParsedLabel::from(outcome));
    }

    fn note_spans(&mut self, spans: &[Span], dropped: usize) {
        self.diag.dropped_spans += dropped as u64;
        self.last().spans = Some(ParsedSpans {
            kept: spans.iter().map(|s| s.surface.clone()).collect(),
            dropped,
        });
    }
}

type Items = (Payload, Vec<String>);

pub struct Pipeline<'a> {
    schema: &'a LabelSchema,
    templates: &'a TemplateRegistry,
    backend: &'a dyn Backend,
    config: PipelineConfig,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        schema: &'a LabelSchema,
        templates: &'a TemplateRegistry,
        backend: &'a dyn Backend,
        config: PipelineConfig,
    ) -> Self {
        Pipeline {
            schema,
            templates,
            backend,
            config,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn nota(&self) -> &str {
        &self.schema.nota.id
    }

    fn text_only(&self) -> bool {
        self.backend.modality() == Modality::TextOnly
    }

    fn case_sensitive(&self) -> bool {
        self.config.span_case_sensitive.unwrap_or(self.schema.span_case_sensitive)
    }

    /// Checks that a run can start, before any backend call.
    pub fn preflight(&self) -> Result<()> {
        self.config.validate(self.schema.task)?;
        if self.schema.task == TaskKind::Mied && self.text_only() {
            return Err(Error::UnsupportedTask {
                task: TaskKind::Mied,
                backend: self.backend.id().to_owned(),
            });
        }
        Ok(())
    }

    /// Runs every instance on a pool of `threads` workers. Stages within an
    /// instance stay sequential. A fatal backend error aborts the run.
    pub fn run(&self, instances: &[MieInstance], threads: usize) -> Result<RunOutput> {
        self.preflight()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        let mut runs = pool.install(|| {
            instances
                .par_iter()
                .map(|inst| self.run_instance(inst))
                .collect::<Result<Vec<_>>>()
        })?;
        runs.sort_by(|a, b| a.prediction.id.cmp(&b.prediction.id));
        let mut out = RunOutput::default();
        for run in runs {
            out.diagnostics.merge(&run.diagnostics);
            out.requests += run.requests;
            out.retries += run.retries;
            if run.errored {
                out.errored.push(run.prediction.id.clone());
            }
            out.predictions.push(run.prediction);
            out.traces.push(run.trace);
        }
        Ok(out)
    }

    /// Runs one instance. Non-fatal backend failures yield an empty
    /// prediction marked as errored.
    pub fn run_instance(&self, inst: &MieInstance) -> Result<InstanceRun> {
        self.preflight()?;
        if inst.task != self.schema.task {
            return Err(Error::Config(format!(
                "instance `{}` is {} but schema `{}` is {}",
                inst.id, inst.task, self.schema.id, self.schema.task
            )));
        }
        let mut ctx = Ctx {
            inst,
            trace: StageTrace::new(&inst.id),
            diag: ParseDiagnostics::default(),
            requests: 0,
            retries: 0,
        };
        let outcome = match (self.config.method, inst.task) {
            (Method::Vanilla, _) => self.run_vanilla(&mut ctx),
            (_, TaskKind::Mner) => self.run_mner(&mut ctx),
            (_, TaskKind::Mted) => self.run_mted(&mut ctx),
            (_, TaskKind::Mre) => self.run_mre(&mut ctx),
            (_, TaskKind::Mied) => self.run_mied(&mut ctx),
        };
        let (payload, provenance, errored) = match outcome {
            Ok((payload, provenance)) => (payload, provenance, false),
            Err(Error::Backend(e)) if !e.is_fatal() => {
                log::warn!("instance {}: {e}", inst.id);
                ctx.trace.error = Some(e.to_string());
                (Payload::empty(inst.task), Vec::new(), true)
            }
            Err(e) => return Err(e),
        };
        Ok(InstanceRun {
            prediction: Prediction {
                id: inst.id.clone(),
                task: inst.task,
                payload,
                provenance,
            },
            trace: ctx.trace,
            diagnostics: ctx.diag,
            requests: ctx.requests,
            retries: ctx.retries,
            errored,
        })
    }

    fn call(
        &self,
        ctx: &mut Ctx<'_>,
        prompt: RenderedPrompt,
        stage: Stage,
        category: Option<&str>,
        candidate: Option<&str>,
    ) -> Result<String> {
        let image = if self.text_only() { None } else { prompt.image };
        let request = GenerationRequest {
            prompt_text: prompt.text,
            image,
            decoding: self.config.decoding.clone(),
            meta: Some(RequestMeta {
                instance_id: ctx.inst.id.clone(),
                stage,
                category: category.map(str::to_owned),
                candidate: candidate.map(str::to_owned),
                options: prompt.option_set,
            }),
        };
        let result = self.backend.generate(&request)?;
        ctx.requests += 1;
        ctx.retries += u64::from(result.retries);
        ctx.trace.calls.push(StageCall {
            stage,
            template_id: prompt.template_id,
            category: category.map(str::to_owned),
            candidate: candidate.map(str::to_owned),
            raw: result.text.clone(),
            label: None,
            spans: None,
        });
        Ok(result.text)
    }

    fn options(&self, subject: OptionSubject<'_>, constraint: Option<(&str, &str)>) -> Result<OptionSet> {
        let base = build_option_set(self.schema, subject, constraint, self.config.fidelity)?;
        Ok(permute_option_set(&base, self.config.option_seed))
    }

    /// Extraction for one category; returns grounded spans in sentence order.
    fn extract(&self, ctx: &mut Ctx<'_>, category: &str) -> Result<Vec<Span>> {
        let t = self.templates.get(ctx.inst.task, Stage::SpanExtraction, self.config.variant)?;
        let prompt = render_span_extraction(t, ctx.inst, self.schema, category)?;
        let raw = self.call(ctx, prompt, Stage::SpanExtraction, Some(category), None)?;
        let parsed = parse_span_list(&raw, &ctx.inst.sentence, self.case_sensitive());
        ctx.note_spans(&parsed.spans, parsed.dropped);
        let mut spans = parsed.spans;
        spans.sort_by_key(|s| s.start.unwrap_or(usize::MAX));
        Ok(spans)
    }

    /// Gold spans as candidates, in schema-category then sentence order.
    fn gold_candidates(&self, inst: &MieInstance) -> Vec<Span> {
        let mut out: Vec<Span> = Vec::new();
        for category in self.schema.label_ids() {
            let mut spans: Vec<&Span> = inst
                .gold
                .spans()
                .iter()
                .filter(|s| s.label == category)
                .map(|s| &s.span)
                .collect();
            spans.sort_by_key(|s| s.start.unwrap_or(usize::MAX));
            for s in spans {
                if !out.iter().any(|c| c.surface == s.surface) {
                    out.push(s.clone());
                }
            }
        }
        out
    }

    /// Classifies each candidate span and keeps the non-NOTA ones.
    fn classify_spans(&self, ctx: &mut Ctx<'_>, candidates: Vec<Span>) -> Result<(Vec<LabeledSpan>, Vec<String>)> {
        let t = self.templates.get(ctx.inst.task, Stage::ChoiceQa, self.config.variant)?;
        let mut labelled = Vec::with_capacity(candidates.len());
        for cand in candidates {
            let opts = self.options(OptionSubject::Span(&cand.surface), None)?;
            let prompt = render_choice_qa(t, ctx.inst, &opts)?;
            let raw = self.call(ctx, prompt, Stage::ChoiceQa, None, Some(&cand.surface))?;
            let outcome = parse_choice(&raw, &opts);
            ctx.note_label(&outcome);
            let label = outcome.value.unwrap_or_else(|| self.nota().to_owned());
            labelled.push((LabeledSpan::new(cand, label.clone()), label));
        }
        let kept: Vec<LabeledSpan> = filter_nota(labelled, self.nota()).into_iter().map(|(s, _)| s).collect();
        let provenance = vec![t.id.clone(); kept.len()];
        Ok((kept, provenance))
    }

    fn run_mner(&self, ctx: &mut Ctx<'_>) -> Result<Items> {
        let candidates = if self.config.method == Method::MqaGoldSpan {
            self.gold_candidates(ctx.inst)
        } else {
            let mut out: Vec<Span> = Vec::new();
            for category in self.schema.label_ids() {
                for s in self.extract(ctx, category)? {
                    if !out.iter().any(|c| c.surface == s.surface) {
                        out.push(s);
                    }
                }
            }
            out
        };
        let (spans, provenance) = self.classify_spans(ctx, candidates)?;
        Ok((Payload::Entities(spans), provenance))
    }

    fn run_mted(&self, ctx: &mut Ctx<'_>) -> Result<Items> {
        let candidates = if self.config.method == Method::MqaGoldSpan {
            self.gold_candidates(ctx.inst)
        } else {
            let t = self.templates.get(TaskKind::Mted, Stage::TedPreprocess, self.config.variant)?;
            let base = build_preprocess_options(self.schema)?;
            let opts = permute_option_set(&base, self.config.option_seed);
            let prompt = render_choice_qa(t, ctx.inst, &opts)?;
            let raw = self.call(ctx, prompt, Stage::TedPreprocess, None, None)?;
            let outcome = parse_choice(&raw, &opts);
            ctx.note_label(&outcome);
            // An unreadable pre-process answer falls back to the first event type
            // so the extraction stage still runs.
            let category = outcome
                .value
                .or_else(|| self.schema.labels.first().map(|l| l.id.clone()))
                .ok_or_else(|| Error::Config(format!("schema `{}` has no labels", self.schema.id)))?;
            self.extract(ctx, &category)?
        };
        let (spans, provenance) = self.classify_spans(ctx, candidates)?;
        Ok((Payload::Triggers(spans), provenance))
    }

    fn single_label(&self, ctx: &mut Ctx<'_>, opts: OptionSet) -> Result<(Option<LabelId>, String)> {
        let t = self.templates.get(ctx.inst.task, Stage::ChoiceQa, self.config.variant)?;
        let prompt = render_choice_qa(t, ctx.inst, &opts)?;
        let raw = self.call(ctx, prompt, Stage::ChoiceQa, None, None)?;
        let outcome = parse_choice(&raw, &opts);
        ctx.note_label(&outcome);
        let label = outcome.value.filter(|l| l != self.nota());
        Ok((label, t.id.clone()))
    }

    fn relation_pair(inst: &MieInstance) -> Result<(&Span, &str, &Span, &str)> {
        match &inst.gold {
            Gold::Relation {
                head,
                head_type,
                tail,
                tail_type,
                ..
            } => Ok((head, head_type, tail, tail_type)),
            _ => Err(Error::Data(format!("instance `{}` has no head/tail pair", inst.id))),
        }
    }

    fn run_mre(&self, ctx: &mut Ctx<'_>) -> Result<Items> {
        let (head, head_type, tail, tail_type) = Self::relation_pair(ctx.inst)?;
        let subject = OptionSubject::Pair {
            head: &head.surface,
            tail: &tail.surface,
        };
        let opts = self.options(subject, Some((head_type, tail_type)))?;
        let (label, template) = self.single_label(ctx, opts)?;
        let provenance = label.iter().map(|_| template.clone()).collect();
        Ok((Payload::Relation(label), provenance))
    }

    fn run_mied(&self, ctx: &mut Ctx<'_>) -> Result<Items> {
        if ctx.inst.image.is_none() {
            return Err(Error::Data(format!("MIED instance `{}` has no image", ctx.inst.id)));
        }
        let opts = self.options(OptionSubject::Context, None)?;
        let (label, template) = self.single_label(ctx, opts)?;
        let provenance = label.iter().map(|_| template.clone()).collect();
        Ok((Payload::Event(label), provenance))
    }

    fn run_vanilla(&self, ctx: &mut Ctx<'_>) -> Result<Items> {
        let stage = if self.text_only() { Stage::TextVanilla } else { Stage::Vanilla };
        let t = self.templates.get(ctx.inst.task, stage, self.config.variant)?;
        let task = ctx.inst.task;
        if task.is_span_task() {
            let mut items = Vec::new();
            for category in self.schema.label_ids() {
                let prompt = render_vanilla(t, ctx.inst, self.schema, Some(category))?;
                let raw = self.call(ctx, prompt, stage, Some(category), None)?;
                let parsed = parse_span_list(&raw, &ctx.inst.sentence, self.case_sensitive());
                ctx.note_spans(&parsed.spans, parsed.dropped);
                items.extend(parsed.spans.into_iter().map(|s| LabeledSpan::new(s, category)));
            }
            let provenance = vec![t.id.clone(); items.len()];
            let payload = if task == TaskKind::Mner {
                Payload::Entities(items)
            } else {
                Payload::Triggers(items)
            };
            return Ok((payload, provenance));
        }
        let mut candidates: Vec<LabelId> = match task {
            TaskKind::Mre => {
                let (_, head_type, _, tail_type) = Self::relation_pair(ctx.inst)?;
                self.schema.require_relation_candidates(head_type, tail_type)?.to_vec()
            }
            _ => self.schema.label_ids().map(str::to_owned).collect(),
        };
        candidates.push(self.nota().to_owned());
        let prompt = render_vanilla(t, ctx.inst, self.schema, None)?;
        let raw = self.call(ctx, prompt, stage, None, None)?;
        let outcome = parse_vanilla_label(&raw, self.schema, &candidates);
        ctx.note_label(&outcome);
        let label = outcome.value.filter(|l| l != self.nota());
        let provenance = label.iter().map(|_| t.id.clone()).collect();
        let payload = if task == TaskKind::Mre {
            Payload::Relation(label)
        } else {
            Payload::Event(label)
        };
        Ok((payload, provenance))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_nota_examples() {
        let empty: Vec<(&str, LabelId)> = vec![];
        assert!(filter_nota(empty, "nota").is_empty());
        let mixed = vec![("s1", "person".to_owned()), ("s2", "nota".to_owned())];
        assert_eq!(filter_nota(mixed, "nota"), vec![("s1", "person".to_owned())]);
        let all = vec![("a", "nota".to_owned()), ("b", "nota".to_owned())];
        assert!(filter_nota(all, "nota").is_empty());
    }
}
