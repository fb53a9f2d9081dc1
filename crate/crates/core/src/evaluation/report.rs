use std::collections::HashSet;

use serde::Serialize;

use super::{match_predictions, match_triggers, micro_f1, Counts, EvalError, MatchCounts, Metrics, MetricsRow, NotaPolicy};
use crate::manifest::ParseDiagnostics;
use crate::model::{LabelId, MieInstance, Prediction, TaskKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassRow {
    pub label: LabelId,
    pub counts: Counts,
    pub metrics: Metrics,
    pub display: MetricsRow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coverage {
    pub gold_instances: usize,
    pub predicted_instances: usize,
    /// Gold instances whose label is NOTA (MRE/MIED only).
    pub nota_gold_instances: usize,
    pub predicted_items: usize,
}

/// Surface-only trigger matching, reported alongside MTED scores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TriggerIdentification {
    pub counts: Counts,
    pub metrics: Metrics,
    pub display: MetricsRow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalReport {
    pub task: TaskKind,
    pub nota_policy: NotaPolicy,
    pub counts: MatchCounts,
    pub metrics: Metrics,
    pub display: MetricsRow,
    pub per_class: Vec<ClassRow>,
    pub coverage: Coverage,
    /// No scorable items at all; F1 is 0 by convention.
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trigger_identification: Option<TriggerIdentification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<ParseDiagnostics>,
}

impl EvalReport {
    pub fn with_diagnostics(mut self, diagnostics: ParseDiagnostics) -> Self {
        self.diagnostics = Some(diagnostics);
        self
    }
}

pub fn evaluate_run(
    gold: &[MieInstance],
    predictions: &[Prediction],
    task: TaskKind,
    policy: NotaPolicy,
    nota: &str,
) -> Result<EvalReport, EvalError> {
    let counts = match_predictions(gold, predictions, task, policy, nota)?;
    let metrics = micro_f1(counts.totals());
    let per_class = counts
        .per_class
        .iter()
        .map(|(label, c)| {
            let m = micro_f1(*c);
            ClassRow {
                label: label.clone(),
                counts: *c,
                display: MetricsRow::from(&m),
                metrics: m,
            }
        })
        .collect();
    let predicted: HashSet<&str> = predictions.iter().map(|p| p.id.as_str()).collect();
    let coverage = Coverage {
        gold_instances: gold.len(),
        predicted_instances: gold.iter().filter(|g| predicted.contains(g.id.as_str())).count(),
        nota_gold_instances: gold.iter().filter(|g| g.gold.label() == Some(nota)).count(),
        predicted_items: predictions.iter().map(|p| p.payload.len()).sum(),
    };
    let trigger_identification = if task == TaskKind::Mted {
        let c = match_triggers(gold, predictions)?.totals();
        let m = micro_f1(c);
        Some(TriggerIdentification {
            counts: c,
            display: MetricsRow::from(&m),
            metrics: m,
        })
    } else {
        None
    };
    Ok(EvalReport {
        task,
        nota_policy: policy,
        degenerate: counts.totals() == Counts::default(),
        display: MetricsRow::from(&metrics),
        counts,
        metrics,
        per_class,
        coverage,
        trigger_identification,
        diagnostics: None,
    })
}
