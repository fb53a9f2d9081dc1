//! Proportional few-shot sampling and the train/validation/test split for
//! event detection data.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LabelId, MieInstance};
use crate::rng::{rng, shuffle};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SamplingError {
    #[error("k = {k} is smaller than the {categories} non-empty categories")]
    KTooSmall { k: usize, categories: usize },

    #[error("category `{category}` needs {needed} instances but only {available} remain")]
    Insufficient {
        category: LabelId,
        needed: usize,
        available: usize,
    },

    #[error("dataset of {size} instances cannot supply {needed} train + validation instances")]
    DatasetTooSmall { size: usize, needed: usize },

    #[error("no category has a positive frequency")]
    Empty,
}

/// Per-category quota for one draw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub k: usize,
    pub per_category: BTreeMap<LabelId, usize>,
    pub seed: u64,
}

/// Labels an instance exhibits. Span tasks list every typed mention's label
/// (with repetition); sentences without mentions, and MRE/MIED instances
/// labelled NOTA, fall under `nota`.
pub fn instance_categories(instance: &MieInstance, nota: &str) -> Vec<LabelId> {
    if let Some(label) = instance.gold.label() {
        return vec![label.to_owned()];
    }
    let spans = instance.gold.spans();
    if spans.is_empty() {
        vec![nota.to_owned()]
    } else {
        spans.iter().map(|s| s.label.clone()).collect()
    }
}

/// Category frequencies. MNER/MTED count mentions, not sentences.
pub fn category_freqs<'a>(instances: impl IntoIterator<Item = &'a MieInstance>, nota: &str) -> BTreeMap<LabelId, u64> {
    let mut freqs = BTreeMap::new();
    for inst in instances {
        for c in instance_categories(inst, nota) {
            *freqs.entry(c).or_insert(0) += 1;
        }
    }
    freqs
}

/// Apportions `k` samples over categories with positive frequency.
///
/// Each category starts at `max(1, floor(ideal))` with `ideal = k * freq /
/// total`. Remaining units go one at a time to the category whose ideal
/// exceeds its count the most; surplus units created by the floor of 1 are
/// taken back from the category whose count exceeds its ideal the most,
/// never below 1. Ties prefer the larger frequency, then the smaller label
/// id, when adding, and the reverse when removing.
pub fn proportional_counts(freqs: &BTreeMap<LabelId, u64>, k: usize) -> Result<BTreeMap<LabelId, usize>, SamplingError> {
    let cats: Vec<(&LabelId, u64)> = freqs.iter().filter(|(_, f)| **f > 0).map(|(l, f)| (l, *f)).collect();
    if cats.is_empty() {
        return Err(SamplingError::Empty);
    }
    if k < cats.len() {
        return Err(SamplingError::KTooSmall {
            k,
            categories: cats.len(),
        });
    }
    let total: i128 = cats.iter().map(|(_, f)| i128::from(*f)).sum();
    let k128 = k as i128;
    let mut counts: Vec<i128> = cats.iter().map(|(_, f)| (k128 * i128::from(*f) / total).max(1)).collect();
    // (ideal - count) scaled by `total`, so comparisons stay in integers.
    let gap = |i: usize, c: &[i128]| k128 * i128::from(cats[i].1) - c[i] * total;
    // Preference order for ties: larger frequency first, then smaller label.
    let prefer = |a: usize, b: usize| cats[b].1.cmp(&cats[a].1).then_with(|| cats[a].0.cmp(cats[b].0));

    let mut sum: i128 = counts.iter().sum();
    while sum < k128 {
        let i = (0..cats.len())
            .min_by(|&a, &b| gap(b, &counts).cmp(&gap(a, &counts)).then_with(|| prefer(a, b)))
            .expect("non-empty");
        counts[i] += 1;
        sum += 1;
    }
    while sum > k128 {
        let i = (0..cats.len())
            .filter(|&i| counts[i] > 1)
            .min_by(|&a, &b| gap(a, &counts).cmp(&gap(b, &counts)).then_with(|| prefer(b, a)))
            .expect("k >= categories leaves a count above 1");
        counts[i] -= 1;
        sum -= 1;
    }
    Ok(cats.iter().zip(counts).map(|((l, _), c)| ((*l).clone(), c as usize)).collect())
}

/// Draws instance ids for `plan`. Categories are filled in ascending quota
/// order (ties by label id); each draws uniformly without replacement from
/// instances exhibiting it that are not yet selected.
pub fn fewshot_sample(instances: &[MieInstance], plan: &SamplePlan, nota: &str) -> Result<Vec<String>, SamplingError> {
    let mut order: Vec<(&LabelId, usize)> = plan.per_category.iter().map(|(l, c)| (l, *c)).collect();
    order.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let cats: Vec<BTreeSet<LabelId>> = instances
        .iter()
        .map(|i| instance_categories(i, nota).into_iter().collect())
        .collect();
    let mut rng = rng(plan.seed);
    let mut taken: HashSet<usize> = HashSet::new();
    let mut selected = Vec::with_capacity(plan.k);
    for (category, quota) in order {
        let mut pool: Vec<usize> = (0..instances.len())
            .filter(|i| !taken.contains(i) && cats[*i].contains(category))
            .collect();
        if pool.len() < quota {
            return Err(SamplingError::Insufficient {
                category: category.clone(),
                needed: quota,
                available: pool.len(),
            });
        }
        shuffle(&mut pool, &mut rng);
        for &i in &pool[..quota] {
            taken.insert(i);
            selected.push(instances[i].id.clone());
        }
    }
    Ok(selected)
}

pub fn plan_for(instances: &[MieInstance], k: usize, seed: u64, nota: &str) -> Result<SamplePlan, SamplingError> {
    Ok(SamplePlan {
        k,
        per_category: proportional_counts(&category_freqs(instances, nota), k)?,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MedSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub train_plan: SamplePlan,
    pub val_plan: SamplePlan,
}

/// Train set by proportional few-shot sampling, validation set sampled the
/// same way from the remainder (seed + 1), everything else is test.
pub fn med_split(
    instances: &[MieInstance],
    k_train: usize,
    n_val: usize,
    seed: u64,
    nota: &str,
) -> Result<MedSplit, SamplingError> {
    let needed = k_train + n_val;
    if instances.len() <= needed {
        return Err(SamplingError::DatasetTooSmall {
            size: instances.len(),
            needed,
        });
    }
    let train_plan = plan_for(instances, k_train, seed, nota)?;
    let train = fewshot_sample(instances, &train_plan, nota)?;
    let in_train: HashSet<&str> = train.iter().map(String::as_str).collect();
    let rest: Vec<MieInstance> = instances.iter().filter(|i| !in_train.contains(i.id.as_str())).cloned().collect();
    let val_plan = plan_for(&rest, n_val, seed.wrapping_add(1), nota)?;
    let val = fewshot_sample(&rest, &val_plan, nota)?;
    let in_val: HashSet<&str> = val.iter().map(String::as_str).collect();
    let test = rest
        .iter()
        .filter(|i| !in_val.contains(i.id.as_str()))
        .map(|i| i.id.clone())
        .collect();
    Ok(MedSplit {
        train,
        val,
        test,
        train_plan,
        val_plan,
    })
}

/// First line of a split file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitHeader {
    pub format: String,
    pub split: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<SamplePlan>,
    pub dataset_sha256: String,
    pub count: usize,
}

impl SplitHeader {
    pub fn new(split: &str, seed: u64, plan: Option<SamplePlan>, dataset_sha256: &str, count: usize) -> Self {
        SplitHeader {
            format: "mqa-split".into(),
            split: split.into(),
            seed,
            plan,
            dataset_sha256: dataset_sha256.into(),
            count,
        }
    }
}

/// Writes the header line followed by one id per line, ids sorted.
pub fn write_split_file(path: &Path, header: &SplitHeader, ids: &[String]) -> std::io::Result<()> {
    let mut sorted = ids.to_vec();
    sorted.sort();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", serde_json::to_string(header).map_err(std::io::Error::other)?)?;
    for id in sorted {
        writeln!(out, "{id}")?;
    }
    out.flush()
}

pub fn read_split_file(path: &Path) -> std::io::Result<(SplitHeader, Vec<String>)> {
    let src = std::fs::read_to_string(path)?;
    let mut lines = src.lines();
    let header = lines
        .next()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "empty split file"))?;
    let header: SplitHeader = serde_json::from_str(header).map_err(std::io::Error::other)?;
    Ok((header, lines.filter(|l| !l.is_empty()).map(str::to_owned).collect()))
}
