use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use super::EvalError;

/// Mean and sample variance (n - 1 denominator) of a set of scores, kept
/// exact. The standard deviation is exposed rounded or as a float.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AggregateStats {
    pub n: usize,
    #[serde(serialize_with = "big_str")]
    pub mean: BigRational,
    #[serde(serialize_with = "big_str")]
    pub variance: BigRational,
}

fn big_str<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

pub fn aggregate_stats(scores: &[BigRational]) -> Result<AggregateStats, EvalError> {
    let n = scores.len();
    if n < 2 {
        return Err(EvalError::TooFewScores(n));
    }
    let count = BigRational::from_integer(BigInt::from(n));
    let mean = scores.iter().fold(BigRational::zero(), |acc, x| acc + x) / &count;
    let ss = scores
        .iter()
        .map(|x| {
            let d = x - &mean;
            &d * &d
        })
        .fold(BigRational::zero(), |acc, x| acc + x);
    let variance = ss / (count - BigRational::one());
    Ok(AggregateStats { n, mean, variance })
}

/// `x` rounded half-up to one decimal, as tenths.
pub fn round_half_up(x: &BigRational) -> BigInt {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    (x * BigRational::from_integer(BigInt::from(10)) + half).floor().to_integer()
}

fn tenths_str(t: &BigInt) -> String {
    let neg = t < &BigInt::zero();
    let a = if neg { -t.clone() } else { t.clone() };
    let ten = BigInt::from(10);
    format!("{}{}.{}", if neg { "-" } else { "" }, &a / &ten, &a % &ten)
}

impl AggregateStats {
    /// Standard deviation in tenths, rounded half-up without leaving exact
    /// arithmetic: the largest `k` with `(2k - 1)^2 <= 400 * variance`.
    pub fn std_tenths(&self) -> BigInt {
        let target = &self.variance * BigRational::from_integer(BigInt::from(400));
        let fits = |k: &BigInt| {
            let odd = BigRational::from_integer(BigInt::from(2) * k - 1);
            &odd * &odd <= target
        };
        if !fits(&BigInt::one()) {
            return BigInt::zero();
        }
        let (mut lo, mut hi) = (BigInt::one(), BigInt::from(2));
        while fits(&hi) {
            lo = hi.clone();
            hi *= 2;
        }
        while &hi - &lo > BigInt::one() {
            let mid: BigInt = (&lo + &hi) / 2;
            if fits(&mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn sample_std(&self) -> f64 {
        self.variance.to_f64().unwrap_or(f64::NAN).sqrt()
    }

    pub fn mean_display(&self) -> String {
        tenths_str(&round_half_up(&self.mean))
    }

    pub fn std_display(&self) -> String {
        tenths_str(&self.std_tenths())
    }

    /// `mean ± std`, both at one decimal.
    pub fn display(&self) -> String {
        format!("{} ± {}", self.mean_display(), self.std_display())
    }
}

/// Parses a plain decimal such as `61.6` or `-3` exactly.
pub fn parse_decimal(s: &str) -> Result<BigRational, EvalError> {
    let bad = || EvalError::BadScore(s.to_owned());
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}0").parse().map_err(|_| bad())?;
    let scale = BigInt::from(10).pow(frac.len() as u32 + 1);
    let v = BigRational::new(digits, scale);
    Ok(if neg { -v } else { v })
}
