use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{EvalError, NotaPolicy};
use crate::model::{LabelId, LabeledSpan, MieInstance, Payload, Prediction, TaskKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Counts { tp, fp, fn_ }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Pooled counts plus the per-label breakdown they are summed from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub per_class: BTreeMap<LabelId, Counts>,
}

impl MatchCounts {
    pub fn totals(&self) -> Counts {
        Counts::new(self.tp, self.fp, self.fn_)
    }

    pub fn add(&mut self, label: &str, c: Counts) {
        if c == Counts::default() {
            return;
        }
        self.tp += c.tp;
        self.fp += c.fp;
        self.fn_ += c.fn_;
        *self.per_class.entry(label.to_owned()).or_default() += c;
    }

    fn tp(&mut self, label: &str) {
        self.add(label, Counts::new(1, 0, 0));
    }
    fn fp(&mut self, label: &str) {
        self.add(label, Counts::new(0, 1, 0));
    }
    fn fn_(&mut self, label: &str) {
        self.add(label, Counts::new(0, 0, 1));
    }
}

/// Multiset matching on (surface, label): each key contributes
/// `min(gold, pred)` true positives.
fn match_spans<'a>(gold: &'a [LabeledSpan], pred: &'a [LabeledSpan], key: impl Fn(&'a LabeledSpan) -> (&'a str, &'a str), out: &mut MatchCounts) {
    let mut tally: BTreeMap<(&str, &str), (u64, u64)> = BTreeMap::new();
    for g in gold {
        tally.entry(key(g)).or_default().0 += 1;
    }
    for p in pred {
        tally.entry(key(p)).or_default().1 += 1;
    }
    for ((_, label), (g, p)) in tally {
        let tp = g.min(p);
        out.add(label, Counts::new(tp, p - tp, g - tp));
    }
}

fn match_label(gold: &str, pred: Option<&str>, policy: NotaPolicy, nota: &str, out: &mut MatchCounts) {
    let pred = pred.filter(|p| *p != nota);
    match (gold == nota, pred, policy) {
        (true, None, NotaPolicy::Exclude) => {}
        (true, None, NotaPolicy::Include) => out.tp(nota),
        (true, Some(p), policy) => {
            out.fp(p);
            if policy == NotaPolicy::Include {
                out.fn_(nota);
            }
        }
        (false, None, policy) => {
            out.fn_(gold);
            if policy == NotaPolicy::Include {
                out.fp(nota);
            }
        }
        (false, Some(p), _) if p == gold => out.tp(gold),
        (false, Some(p), _) => {
            out.fp(p);
            out.fn_(gold);
        }
    }
}

/// Pairs predictions with gold by id. Gold instances without a prediction
/// are scored against an empty payload.
fn align<'a>(
    gold: &'a [MieInstance],
    predictions: &'a [Prediction],
    task: TaskKind,
) -> Result<Vec<(&'a MieInstance, Option<&'a Payload>)>, EvalError> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
    for p in predictions {
        if p.task != task || p.payload.task() != task {
            return Err(EvalError::TaskMismatch {
                id: p.id.clone(),
                expected: task,
                found: p.payload.task(),
            });
        }
        if by_id.insert(&p.id, p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.id.clone()));
        }
    }
    let gold_ids: HashSet<&str> = gold.iter().map(|g| g.id.as_str()).collect();
    if let Some(p) = predictions.iter().find(|p| !gold_ids.contains(p.id.as_str())) {
        return Err(EvalError::UnknownId(p.id.clone()));
    }
    gold.iter()
        .map(|g| {
            if g.task != task {
                return Err(EvalError::TaskMismatch {
                    id: g.id.clone(),
                    expected: task,
                    found: g.task,
                });
            }
            Ok((g, by_id.get(g.id.as_str()).map(|p| &p.payload)))
        })
        .collect()
}

pub fn match_predictions(
    gold: &[MieInstance],
    predictions: &[Prediction],
    task: TaskKind,
    policy: NotaPolicy,
    nota: &str,
) -> Result<MatchCounts, EvalError> {
    let mut out = MatchCounts::default();
    for (g, p) in align(gold, predictions, task)? {
        let empty = Payload::empty(task);
        let p = p.unwrap_or(&empty);
        if task.is_span_task() {
            match_spans(g.gold.spans(), p.spans(), |s| (s.span.surface.as_str(), s.label.as_str()), &mut out);
        } else {
            let gold_label = g.gold.label().unwrap_or(nota);
            match_label(gold_label, p.label(), policy, nota, &mut out);
        }
    }
    Ok(out)
}

/// Trigger identification: MTED spans matched on surface only. All counts
/// land in the single class `trigger`.
pub fn match_triggers(gold: &[MieInstance], predictions: &[Prediction]) -> Result<MatchCounts, EvalError> {
    let mut out = MatchCounts::default();
    for (g, p) in align(gold, predictions, TaskKind::Mted)? {
        let spans = p.map(Payload::spans).unwrap_or_default();
        match_spans(g.gold.spans(), spans, |s| (s.span.surface.as_str(), "trigger"), &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Gold, Sentence, Span};

    fn mner(id: &str, gold: &[(&str, &str)]) -> MieInstance {
        MieInstance {
            id: id.into(),
            task: TaskKind::Mner,
            sentence: Sentence::new("London Obama"),
            image: None,
            gold: Gold::Entities {
                entities: gold.iter().map(|(s, l)| LabeledSpan::new(Span::new(*s), *l)).collect(),
            },
        }
    }

    fn pred(id: &str, items: &[(&str, &str)]) -> Prediction {
        Prediction {
            id: id.into(),
            task: TaskKind::Mner,
            payload: Payload::Entities(items.iter().map(|(s, l)| LabeledSpan::new(Span::new(*s), *l)).collect()),
            provenance: vec![],
        }
    }

    fn rel(id: &str, relation: &str) -> MieInstance {
        MieInstance {
            id: id.into(),
            task: TaskKind::Mre,
            sentence: Sentence::new("a b"),
            image: None,
            gold: Gold::Relation {
                head: Span::at("a", 0),
                head_type: "per".into(),
                tail: Span::at("b", 2),
                tail_type: "loc".into(),
                relation: relation.into(),
            },
        }
    }

    fn rel_pred(id: &str, r: Option<&str>) -> Prediction {
        Prediction {
            id: id.into(),
            task: TaskKind::Mre,
            payload: Payload::Relation(r.map(Into::into)),
            provenance: vec![],
        }
    }

    #[test]
    fn mre_missing_relation_is_fn() {
        let c = match_predictions(&[rel("1", "r")], &[rel_pred("1", None)], TaskKind::Mre, NotaPolicy::Exclude, "nota").unwrap();
        assert_eq!(c.totals(), Counts::new(0, 0, 1));
    }

    #[test]
    fn mre_relation_on_nota_is_fp_only() {
        let c = match_predictions(&[rel("1", "nota")], &[rel_pred("1", Some("r"))], TaskKind::Mre, NotaPolicy::Exclude, "nota").unwrap();
        assert_eq!(c.totals(), Counts::new(0, 1, 0));
    }

    #[test]
    fn mre_wrong_relation_is_fp_and_fn() {
        let c = match_predictions(&[rel("1", "r")], &[rel_pred("1", Some("s"))], TaskKind::Mre, NotaPolicy::Exclude, "nota").unwrap();
        assert_eq!(c.totals(), Counts::new(0, 1, 1));
        assert_eq!(c.per_class["s"], Counts::new(0, 1, 0));
        assert_eq!(c.per_class["r"], Counts::new(0, 0, 1));
    }

    #[test]
    fn include_policy_scores_nota_as_a_class() {
        let c = match_predictions(&[rel("1", "nota")], &[rel_pred("1", None)], TaskKind::Mre, NotaPolicy::Include, "nota").unwrap();
        assert_eq!(c.per_class["nota"], Counts::new(1, 0, 0));
    }

    #[test]
    fn mner_multiset_example() {
        let g = mner("1", &[("London", "location"), ("Obama", "person")]);
        let p = pred("1", &[("London", "location"), ("London", "person")]);
        let c = match_predictions(&[g], &[p], TaskKind::Mner, NotaPolicy::Exclude, "nota").unwrap();
        assert_eq!(c.totals(), Counts::new(1, 1, 1));
    }

    #[test]
    fn duplicate_mentions_count_separately() {
        let g = mner("1", &[("Paris", "location"), ("Paris", "location")]);
        let p = pred("1", &[("Paris", "location")]);
        let c = match_predictions(&[g], &[p], TaskKind::Mner, NotaPolicy::Exclude, "nota").unwrap();
        assert_eq!(c.totals(), Counts::new(1, 0, 1));
    }

    #[test]
    fn unknown_and_duplicate_ids_are_errors() {
        let g = [mner("1", &[])];
        assert!(matches!(
            match_predictions(&g, &[pred("2", &[])], TaskKind::Mner, NotaPolicy::Exclude, "nota"),
            Err(EvalError::UnknownId(_))
        ));
        assert!(matches!(
            match_predictions(&g, &[pred("1", &[]), pred("1", &[])], TaskKind::Mner, NotaPolicy::Exclude, "nota"),
            Err(EvalError::DuplicatePrediction(_))
        ));
    }

    #[test]
    fn missing_prediction_counts_as_empty() {
        let g = [mner("1", &[("London", "location")])];
        let c = match_predictions(&g, &[], TaskKind::Mner, NotaPolicy::Exclude, "nota").unwrap();
        assert_eq!(c.totals(), Counts::new(0, 0, 1));
    }
}
