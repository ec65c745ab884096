//! Numeric plumbing: extended reals, log-base handling and deterministic
//! summation.
//!
//! All library computations are carried out in nats. Reports convert to the
//! configured base at the edge.

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg};

/// Real number extended with signed infinities.
///
/// Infinity is a dedicated variant rather than an IEEE overflow, so sums of
/// log-ratios with a zero probability stay well defined.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Wraps a finite float. Panics on NaN; maps IEEE infinities to the sentinels.
    pub fn new(x: f64) -> Self {
        assert!(!x.is_nan(), "ExtReal from NaN");
        if x == f64::INFINITY {
            ExtReal::PosInf
        } else if x == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(x)
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// Value as f64, with IEEE infinities for the sentinels.
    pub fn value(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    /// Finite value or `None`.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    /// Multiply by a positive finite scalar.
    pub fn scale(self, k: f64) -> Self {
        debug_assert!(k > 0.0 && k.is_finite());
        match self {
            ExtReal::Finite(x) => ExtReal::Finite(x * k),
            other => other,
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        use ExtReal::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => ExtReal::new(a + b),
            (PosInf, NegInf) | (NegInf, PosInf) => {
                panic!("undefined sum of opposite infinities")
            }
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, _) | (_, NegInf) => NegInf,
        }
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;
    fn neg(self) -> ExtReal {
        match self {
            ExtReal::NegInf => ExtReal::PosInf,
            ExtReal::Finite(x) => ExtReal::Finite(-x),
            ExtReal::PosInf => ExtReal::NegInf,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::new(x)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PosInf => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => s.serialize_f64(*x),
            ExtReal::PosInf => s.serialize_str("inf"),
            ExtReal::NegInf => s.serialize_str("-inf"),
        }
    }
}

/// Logarithm base used in reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
}

impl LogBase {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "2" | "bits" => Some(LogBase::Two),
            "e" | "nats" => Some(LogBase::E),
            _ => None,
        }
    }

    /// Natural log of the base.
    pub fn ln_base(self) -> f64 {
        match self {
            LogBase::Two => std::f64::consts::LN_2,
            LogBase::E => 1.0,
        }
    }

    /// Convert a log-quantity from nats.
    pub fn from_nats(self, x: f64) -> f64 {
        x / self.ln_base()
    }

    /// Convert a squared log-quantity (variance) from nats².
    pub fn from_nats2(self, x: f64) -> f64 {
        x / (self.ln_base() * self.ln_base())
    }

    pub fn to_nats(self, x: f64) -> f64 {
        x * self.ln_base()
    }

    pub fn unit(self) -> &'static str {
        match self {
            LogBase::Two => "bits",
            LogBase::E => "nats",
        }
    }
}

/// Pairwise (cascade) summation; order-stable and accurate.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 32;
    if xs.len() <= BASE {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Chunk size for deterministic parallel reductions. Fixed so results do not
/// depend on the thread count.
pub const CHUNK: usize = 1 << 12;

/// Deterministic parallel sum of `f(i)` for `i in 0..len`.
///
/// Each fixed-size chunk is summed sequentially, then the chunk partials are
/// combined by pairwise reduction. The result is independent of the number
/// of rayon threads.
pub fn par_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if len <= CHUNK {
        let mut s = 0.0;
        for i in 0..len {
            s += f(i);
        }
        return s;
    }
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            s
        })
        .collect();
    pairwise_sum(&partials)
}

/// Deterministic parallel sum of vector-valued `f(i)` of fixed width.
pub fn par_sum_vec<F>(len: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let chunks = len.div_ceil(CHUNK).max(1);
    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            let mut acc = vec![0.0; width];
            for i in lo..hi {
                f(i, &mut acc);
            }
            acc
        })
        .collect();
    (0..width)
        .map(|k| {
            let col: Vec<f64> = partials.iter().map(|p| p[k]).collect();
            pairwise_sum(&col)
        })
        .collect()
}

/// Round to `sig` significant decimal digits.
pub fn round_sig(x: f64, sig: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", sig.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// Format with 12 significant digits, as used in reports and CSV.
pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{}", round_sig(x, 12))
    }
}

/// Binary entropy in nats.
pub fn h2(p: f64) -> f64 {
    let mut s = 0.0;
    if p > 0.0 {
        s -= p * p.ln();
    }
    if p < 1.0 {
        s -= (1.0 - p) * (1.0 - p).ln();
    }
    s
}

/// log(Σ exp(x_i)) with max shift.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
