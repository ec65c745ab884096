//! Bound reports shared by every checking operation.

use crate::numeric::LogBase;
use serde::{Serialize, Serializer};

/// Tolerance on slack for an exact-mode pass.
pub const SLACK_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    FormulaOnly,
}

impl Verdict {
    /// Worst of two verdicts: fail > inconclusive > formula-only > pass.
    pub fn worst(self, other: Verdict) -> Verdict {
        fn rank(v: Verdict) -> u8 {
            match v {
                Verdict::Pass => 0,
                Verdict::FormulaOnly => 1,
                Verdict::Inconclusive => 2,
                Verdict::Fail => 3,
            }
        }
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }

    /// CLI exit code for this verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass | Verdict::FormulaOnly => 0,
            Verdict::Fail => 2,
            Verdict::Inconclusive => 3,
        }
    }
}

/// Physical dimension of a reported number, used for base conversion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dim {
    /// Log-units (nats internally).
    Log,
    /// Squared log-units (variances of log-ratios).
    LogSq,
    /// Dimensionless (probabilities, counts, ratios).
    Plain,
}

impl Dim {
    pub fn convert(self, x: f64, base: LogBase) -> f64 {
        match self {
            Dim::Log => base.from_nats(x),
            Dim::LogSq => base.from_nats2(x),
            Dim::Plain => x,
        }
    }
}

/// Which way the checked inequality points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    LhsLeRhs,
    LhsGeRhs,
}

/// Serialize a float, writing infinities as strings.
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedValue {
    pub name: String,
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    pub dim: Dim,
}

/// A checked inequality with both sides, the constants used and a verdict.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub name: String,
    #[serde(serialize_with = "ser_f64")]
    pub lhs: f64,
    #[serde(serialize_with = "ser_f64")]
    pub rhs: f64,
    pub dim: Dim,
    pub orientation: Orientation,
    #[serde(serialize_with = "ser_f64")]
    pub slack: f64,
    pub verdict: Verdict,
    pub units: String,
    pub constants: Vec<NamedValue>,
    pub notes: Vec<String>,
}

impl BoundReport {
    /// Report for `lhs <= rhs` (values in nats when `dim` is a log dimension).
    pub fn le(name: &str, lhs: f64, rhs: f64, dim: Dim) -> Self {
        Self::build(name, lhs, rhs, dim, Orientation::LhsLeRhs)
    }

    /// Report for `lhs >= rhs`.
    pub fn ge(name: &str, lhs: f64, rhs: f64, dim: Dim) -> Self {
        Self::build(name, lhs, rhs, dim, Orientation::LhsGeRhs)
    }

    fn build(name: &str, lhs: f64, rhs: f64, dim: Dim, orientation: Orientation) -> Self {
        let slack = match orientation {
            Orientation::LhsLeRhs => rhs - lhs,
            Orientation::LhsGeRhs => lhs - rhs,
        };
        let slack = if slack.is_nan() {
            // inf - inf: both sides infinite and equal orientation-wise
            0.0
        } else {
            slack
        };
        let verdict = if slack >= -SLACK_TOL {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        BoundReport {
            name: name.to_string(),
            lhs,
            rhs,
            dim,
            orientation,
            slack,
            verdict,
            units: "nats".into(),
            constants: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with(mut self, name: &str, value: f64, dim: Dim) -> Self {
        self.constants.push(NamedValue {
            name: name.to_string(),
            value,
            dim,
        });
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    pub fn verdict(mut self, v: Verdict) -> Self {
        self.verdict = v;
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.value)
    }

    /// Copy of the report with log-valued fields expressed in `base`.
    pub fn in_base(&self, base: LogBase) -> BoundReport {
        let mut r = self.clone();
        r.lhs = self.dim.convert(self.lhs, base);
        r.rhs = self.dim.convert(self.rhs, base);
        r.slack = self.dim.convert(self.slack, base);
        for c in &mut r.constants {
            c.value = c.dim.convert(c.value, base);
        }
        r.units = base.unit().to_string();
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_from_slack() {
        assert!(BoundReport::le("x", 1.0, 1.0, Dim::Plain).passed());
        assert!(BoundReport::le("x", 1.0 + 1e-10, 1.0, Dim::Plain).passed());
        assert!(!BoundReport::le("x", 1.1, 1.0, Dim::Plain).passed());
        assert!(BoundReport::ge("x", 2.0, 1.0, Dim::Plain).passed());
        assert!(BoundReport::le("x", 0.0, f64::INFINITY, Dim::Log).passed());
    }

    #[test]
    fn base_conversion() {
        let r = BoundReport::le("x", std::f64::consts::LN_2, 1.0, Dim::Log)
            .with("v", std::f64::consts::LN_2.powi(2), Dim::LogSq)
            .in_base(LogBase::Two);
        assert!((r.lhs - 1.0).abs() < 1e-15);
        assert!((r.constants[0].value - 1.0).abs() < 1e-15);
        assert_eq!(r.units, "bits");
    }

    #[test]
    fn worst_verdict() {
        assert_eq!(Verdict::Pass.worst(Verdict::Inconclusive), Verdict::Inconclusive);
        assert_eq!(Verdict::Fail.worst(Verdict::Inconclusive), Verdict::Fail);
    }
}
