use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LabelId, TaskKind};
use crate::rng::seeded_permutation;
use crate::schema::{LabelSchema, NotaPosition};

/// Which typed labels appear in MNER option blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateFidelity {
    /// Every schema label plus NOTA.
    #[default]
    Schema,
    /// Only the labels the published option block lists (`published_labels`).
    Published,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub letter: char,
    pub label: LabelId,
    pub text: String,
}

impl AnswerOption {
    pub fn line(&self) -> String {
        format!("{}. {}", self.letter, self.text)
    }
}

/// Lettered answer options. Letters always run consecutively from `A`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionSet {
    options: Vec<AnswerOption>,
    nota: Option<LabelId>,
}

/// What the options talk about.
#[derive(Debug, Clone, Copy)]
pub enum OptionSubject<'a> {
    Span(&'a str),
    Pair { head: &'a str, tail: &'a str },
    /// Image or sentence level classification; option texts have no slots.
    Context,
}

impl OptionSet {
    /// Builds a set from `(label, text)` pairs, lettering them in order.
    pub fn from_entries(entries: Vec<(LabelId, String)>, nota: Option<LabelId>) -> Self {
        let options = entries
            .into_iter()
            .zip('A'..='Z')
            .map(|((label, text), letter)| AnswerOption { letter, label, text })
            .collect();
        OptionSet { options, nota }
    }

    pub fn options(&self) -> &[AnswerOption] {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn nota_label(&self) -> Option<&str> {
        self.nota.as_deref()
    }

    pub fn decode(&self, letter: char) -> Option<&str> {
        self.options
            .iter()
            .find(|o| o.letter == letter)
            .map(|o| o.label.as_str())
    }

    pub fn letter_of(&self, label: &str) -> Option<char> {
        self.options.iter().find(|o| o.label == label).map(|o| o.letter)
    }

    pub fn decode_map(&self) -> BTreeMap<char, LabelId> {
        self.options.iter().map(|o| (o.letter, o.label.clone())).collect()
    }

    /// `A. text` lines joined with newlines.
    pub fn block(&self) -> String {
        self.options.iter().map(AnswerOption::line).collect::<Vec<_>>().join("\n")
    }

    /// Number of options carrying the NOTA label.
    pub fn nota_count(&self) -> usize {
        match &self.nota {
            Some(n) => self.options.iter().filter(|o| &o.label == n).count(),
            None => 0,
        }
    }

    /// Checks lettering and that the decode map is a bijection.
    pub fn is_well_formed(&self) -> bool {
        let letters_ok = self.options.iter().zip('A'..='Z').all(|(o, l)| o.letter == l) && self.options.len() <= 26;
        let mut labels: Vec<_> = self.options.iter().map(|o| &o.label).collect();
        labels.sort();
        labels.dedup();
        letters_ok && labels.len() == self.options.len()
    }
}

pub(crate) fn fill(template: &str, subject: OptionSubject<'_>) -> String {
    match subject {
        OptionSubject::Span(s) => template.replace("{span}", s),
        OptionSubject::Pair { head, tail } => template.replace("{head}", head).replace("{tail}", tail),
        OptionSubject::Context => template.to_owned(),
    }
}

/// Builds the classification options for one subject: one option per
/// applicable label in schema order plus the NOTA option at the schema's
/// NOTA position.
///
/// For MRE `constraint` names the (head type, tail type) pair and restricts
/// the labels to that pair's admitted relations.
pub fn build_option_set(
    schema: &LabelSchema,
    subject: OptionSubject<'_>,
    constraint: Option<(&str, &str)>,
    fidelity: TemplateFidelity,
) -> Result<OptionSet> {
    let labels: Vec<&str> = match schema.task {
        TaskKind::Mre => {
            let (head, tail) = constraint
                .ok_or_else(|| Error::Config("relation options need an entity type pair".into()))?;
            schema
                .require_relation_candidates(head, tail)?
                .iter()
                .map(String::as_str)
                .collect()
        }
        _ => match (fidelity, &schema.published_labels) {
            (TemplateFidelity::Published, Some(subset)) => schema
                .label_ids()
                .filter(|id| subset.iter().any(|s| s == id))
                .collect(),
            _ => schema.label_ids().collect(),
        },
    };
    let mut entries: Vec<(LabelId, String)> = labels
        .into_iter()
        .map(|id| {
            let def = schema.label(id).expect("schema labels are checked at load");
            (id.to_owned(), fill(&def.option_text, subject))
        })
        .collect();
    let nota = (schema.nota.id.clone(), fill(&schema.nota.option_text, subject));
    match schema.nota.position {
        NotaPosition::First => entries.insert(0, nota),
        NotaPosition::Last => entries.push(nota),
    }
    Ok(OptionSet::from_entries(entries, Some(schema.nota.id.clone())))
}

/// Options of the MTED sentence-level pre-process prompt: one per event
/// type, no NOTA.
pub fn build_preprocess_options(schema: &LabelSchema) -> Result<OptionSet> {
    let entries = schema
        .labels
        .iter()
        .map(|l| {
            let text = l.preprocess_text.clone().ok_or_else(|| {
                Error::Config(format!("label `{}` has no pre-process wording", l.id))
            })?;
            Ok((l.id.clone(), text))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OptionSet::from_entries(entries, None))
}

/// Reorders the options by the seeded permutation for their count and
/// reletters them from `A`. Seed 0 keeps the original order.
pub fn permute_option_set(options: &OptionSet, seed: u64) -> OptionSet {
    let order = seeded_permutation(options.len(), seed);
    apply_order(options, &order)
}

/// Reorders by an explicit permutation: new position `i` takes old option
/// `order[i]`.
pub fn apply_order(options: &OptionSet, order: &[usize]) -> OptionSet {
    let entries = order
        .iter()
        .map(|&i| {
            let o = &options.options[i];
            (o.label.clone(), o.text.clone())
        })
        .collect();
    OptionSet::from_entries(entries, options.nota.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::invert_permutation;

    fn mner() -> LabelSchema {
        LabelSchema::builtin("twitter17").unwrap()
    }

    #[test]
    fn mner_options_are_schema_driven_with_nota_last() {
        let set = build_option_set(&mner(), OptionSubject::Span("London"), None, TemplateFidelity::Schema).unwrap();
        let labels: Vec<_> = set.options().iter().map(|o| o.label.as_str()).collect();
        assert_eq!(labels, ["location", "person", "organization", "miscellaneous", "nota"]);
        assert_eq!(set.options()[0].line(), "A. London is a location entity");
        assert!(set.options()[4].text.ends_with("is not a named entity or does not belong to type [location, person, organization, miscellaneous]"));
        assert_eq!(set.nota_count(), 1);
        assert!(set.is_well_formed());
    }

    #[test]
    fn published_fidelity_keeps_the_published_four_options() {
        let set = build_option_set(&mner(), OptionSubject::Span("London"), None, TemplateFidelity::Published).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.decode('D'), Some("nota"));
    }

    #[test]
    fn mied_has_nine_options_ending_with_no_event() {
        let schema = LabelSchema::builtin("m2e2_image").unwrap();
        let set = build_option_set(&schema, OptionSubject::Context, None, TemplateFidelity::Schema).unwrap();
        assert_eq!(set.len(), 9);
        let last = set.options().last().unwrap();
        assert_eq!((last.letter, last.text.as_str()), ('I', "The image describes no event"));
        assert_eq!(set.decode('G'), Some("life_die"));
    }

    #[test]
    fn mre_two_relation_pair_gives_three_options() {
        let schema = LabelSchema::builtin("mnre_v2").unwrap();
        let subject = OptionSubject::Pair { head: "Obama", tail: "Hawaii" };
        let set = build_option_set(&schema, subject, Some(("per", "loc")), TemplateFidelity::Schema).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.options()[1].text, "Obama was born in Hawaii");
        assert_eq!(set.options()[2].text, "Obama has no known relations to Hawaii");
    }

    #[test]
    fn mre_uncovered_pair_names_the_pair() {
        let schema = LabelSchema::builtin("mnre_v2").unwrap();
        let subject = OptionSubject::Pair { head: "a", tail: "b" };
        let err = build_option_set(&schema, subject, Some(("loc", "org")), TemplateFidelity::Schema).unwrap_err();
        assert!(matches!(err, Error::MissingConstraint { .. }));
    }

    #[test]
    fn mted_nota_comes_first() {
        let schema = LabelSchema::builtin("m2e2_text").unwrap();
        let set = build_option_set(&schema, OptionSubject::Span("fired"), None, TemplateFidelity::Schema).unwrap();
        assert_eq!(set.len(), 9);
        assert_eq!(set.decode('A'), Some("nota"));
        assert_eq!(set.options()[0].text, "The word fired is a common word and does not reflect any of the other event");
        let pre = build_preprocess_options(&schema).unwrap();
        assert_eq!(pre.len(), 8);
        assert_eq!(pre.nota_count(), 0);
        assert_eq!(pre.options()[6].text, "The life of a person ends");
    }

    #[test]
    fn seed_zero_is_identity() {
        let set = build_option_set(&mner(), OptionSubject::Span("x"), None, TemplateFidelity::Schema).unwrap();
        assert_eq!(permute_option_set(&set, 0), set);
    }

    #[test]
    fn permutation_keeps_letters_and_label_multiset() {
        let set = build_option_set(&mner(), OptionSubject::Span("x"), None, TemplateFidelity::Published).unwrap();
        let p = permute_option_set(&set, 7);
        assert!(p.is_well_formed());
        let letters: Vec<_> = p.options().iter().map(|o| o.letter).collect();
        assert_eq!(letters, ['A', 'B', 'C', 'D']);
        let mut a: Vec<_> = set.options().iter().map(|o| o.label.clone()).collect();
        let mut b: Vec<_> = p.options().iter().map(|o| o.label.clone()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn inverse_permutation_restores_original() {
        let set = build_option_set(&mner(), OptionSubject::Span("x"), None, TemplateFidelity::Schema).unwrap();
        for seed in 1..50 {
            let order = seeded_permutation(set.len(), seed);
            let permuted = apply_order(&set, &order);
            assert_eq!(permuted, permute_option_set(&set, seed));
            let restored = apply_order(&permuted, &invert_permutation(&order));
            assert_eq!(restored, set);
        }
    }
}
