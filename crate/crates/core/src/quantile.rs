//! Extended reals, intervals and the conformal quantile.

use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// A real number or one of the two infinities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// `f64` view, with the infinities mapped to `±f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::NegInf => f64::NEG_INFINITY,
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInf => f64::INFINITY,
        }
    }

    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtendedReal::PosInf
        } else if v == f64::NEG_INFINITY {
            ExtendedReal::NegInf
        } else {
            ExtendedReal::Finite(v)
        }
    }

    /// Translation by a finite amount; infinities are absorbing.
    pub fn shift(self, by: f64) -> Self {
        match self {
            ExtendedReal::Finite(v) => ExtendedReal::Finite(v + by),
            other => other,
        }
    }

    pub fn neg(self) -> Self {
        match self {
            ExtendedReal::NegInf => ExtendedReal::PosInf,
            ExtendedReal::Finite(v) => ExtendedReal::Finite(-v),
            ExtendedReal::PosInf => ExtendedReal::NegInf,
        }
    }

    fn rank(self) -> u8 {
        match self {
            ExtendedReal::NegInf => 0,
            ExtendedReal::Finite(_) => 1,
            ExtendedReal::PosInf => 2,
        }
    }
}

impl Eq for ExtendedReal {}

impl Ord for ExtendedReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.total_cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq<f64> for ExtendedReal {
    fn eq(&self, other: &f64) -> bool {
        self.to_f64() == *other
    }
}

impl PartialOrd<f64> for ExtendedReal {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.to_f64().partial_cmp(other)
    }
}

impl From<f64> for ExtendedReal {
    fn from(v: f64) -> Self {
        ExtendedReal::from_f64(v)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::NegInf => f.write_str("-inf"),
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInf => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => s.serialize_f64(*v),
            ExtendedReal::NegInf => s.serialize_str("-inf"),
            ExtendedReal::PosInf => s.serialize_str("inf"),
        }
    }
}

/// Closed interval `[lo, hi]` over the extended reals, `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub lo: ExtendedReal,
    pub hi: ExtendedReal,
}

impl Interval {
    /// Returns `None` when `lo > hi`, i.e. the interval is empty.
    pub fn new(lo: ExtendedReal, hi: ExtendedReal) -> Option<Self> {
        (lo <= hi).then_some(Self { lo, hi })
    }

    pub fn finite(lo: f64, hi: f64) -> Option<Self> {
        Self::new(ExtendedReal::Finite(lo), ExtendedReal::Finite(hi))
    }

    pub fn real_line() -> Self {
        Self { lo: ExtendedReal::NegInf, hi: ExtendedReal::PosInf }
    }

    /// Symmetric interval `center ± margin`; the real line if `margin` is `+∞`.
    pub fn centered(center: f64, margin: ExtendedReal) -> Self {
        match margin {
            ExtendedReal::Finite(q) => Self {
                lo: ExtendedReal::Finite(center - q),
                hi: ExtendedReal::Finite(center + q),
            },
            _ => Self::real_line(),
        }
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && self.hi >= y
    }

    /// Lebesgue measure (possibly infinite).
    pub fn length(&self) -> f64 {
        self.hi.to_f64() - self.lo.to_f64()
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// Order-statistic index `⌈tau·n⌉`, clamped below at 1.
///
/// Products such as `(1 - α)(1 + 1/n)·n` that are integers in exact
/// arithmetic can land one ulp above the integer in floating point; values
/// within a relative `1e-9` of an integer are snapped to it before the ceiling.
pub fn quantile_rank(n: usize, tau: f64) -> usize {
    let t = tau * n as f64;
    let r = t.round();
    let k = if (t - r).abs() <= 1e-9 * r.abs().max(1.0) { r } else { t.ceil() };
    if k < 1.0 {
        1
    } else if k > usize::MAX as f64 {
        usize::MAX
    } else {
        k as usize
    }
}

/// Conformal quantile: the `⌈tau·n⌉`-th smallest of `values`, `+∞` if that
/// rank exceeds `n`, and the minimum for `tau = 0`.
pub fn conformal_quantile(values: &[f64], tau: f64) -> Result<ExtendedReal> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("quantile level must be >= 0, got {tau}")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("NaN in quantile input".into()));
    }
    let k = quantile_rank(values.len(), tau);
    if k > values.len() {
        return Ok(ExtendedReal::PosInf);
    }
    let mut buf = values.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(ExtendedReal::from_f64(*kth))
}

/// The level `(1 - α)(1 + 1/n)` used by every conformal construction here.
pub fn conformal_level(alpha: f64, n: usize) -> f64 {
    (1.0 - alpha) * (1.0 + 1.0 / n as f64)
}
