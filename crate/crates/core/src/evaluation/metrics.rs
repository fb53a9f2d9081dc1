use num_rational::Ratio;
use serde::{Serialize, Serializer};

use super::Counts;

/// Exact precision, recall and F1. Each is 0 when its denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Metrics {
    #[serde(serialize_with = "ratio_str")]
    pub precision: Ratio<u64>,
    #[serde(serialize_with = "ratio_str")]
    pub recall: Ratio<u64>,
    #[serde(serialize_with = "ratio_str")]
    pub f1: Ratio<u64>,
}

fn ratio_str<S: Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

fn ratio(num: u64, den: u64) -> Ratio<u64> {
    if den == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(num, den)
    }
}

/// Micro-averaged scores from pooled counts. F1 is computed as
/// `2tp / (2tp + fp + fn)`, which equals `2PR / (P + R)` whenever `P + R > 0`.
pub fn micro_f1(c: Counts) -> Metrics {
    Metrics {
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
    }
}

/// `r` as a percentage rounded half-up to one decimal, e.g. `4/7` -> `57.1`.
pub fn percent(r: Ratio<u64>) -> String {
    let (n, d) = (u128::from(*r.numer()), u128::from(*r.denom()));
    let tenths = (n * 2000 + d) / (2 * d);
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// Display row in percent, one decimal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetricsRow {
    pub p: String,
    pub r: String,
    pub f1: String,
}

impl From<&Metrics> for MetricsRow {
    fn from(m: &Metrics) -> Self {
        MetricsRow {
            p: percent(m.precision),
            r: percent(m.recall),
            f1: percent(m.f1),
        }
    }
}

impl std::fmt::Display for MetricsRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "P {}  R {}  F1 {}", self.p, self.r, self.f1)
    }
}
