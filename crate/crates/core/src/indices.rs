//! Poverty indices of the general weighted form
//!
//! ```text
//!   A(Q,n,Z) / (n·B(Q,n)) · Σ_{j≤Q} w(μ₁n + μ₂Q − μ₃j + μ₄) · d((Z − Y_(j)) / Z)
//! ```
//!
//! and independent closed forms for each named member. Poor means `Y <= Z`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survey_data::EmpiricalDist;

/// A named member of the index family together with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", content = "parameter", rename_all = "snake_case")]
pub enum Measure {
    Fgt(f64),
    Chakravarty(f64),
    Sen,
    Shorrocks,
    Thon,
    Kakwani(f64),
}

/// Measure names without parameters, for [`measure_spec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    Fgt,
    Chakravarty,
    Sen,
    Shorrocks,
    Thon,
    Kakwani,
}

impl Measure {
    pub fn validate(self) -> Result<Self> {
        match self {
            Measure::Fgt(a) | Measure::Chakravarty(a) if !(a.is_finite() && a >= 0.0) => Err(
                Error::Parameter(format!("{self}: exponent must be finite and >= 0")),
            ),
            Measure::Kakwani(k) if !(k.is_finite() && k >= 1.0) => Err(Error::Parameter(format!(
                "kakwani parameter {k} unsupported; need k >= 1"
            ))),
            m => Ok(m),
        }
    }

    pub fn kind(self) -> MeasureKind {
        match self {
            Measure::Fgt(_) => MeasureKind::Fgt,
            Measure::Chakravarty(_) => MeasureKind::Chakravarty,
            Measure::Sen => MeasureKind::Sen,
            Measure::Shorrocks => MeasureKind::Shorrocks,
            Measure::Thon => MeasureKind::Thon,
            Measure::Kakwani(_) => MeasureKind::Kakwani,
        }
    }

    pub fn parameter(self) -> Option<f64> {
        match self {
            Measure::Fgt(a) | Measure::Chakravarty(a) | Measure::Kakwani(a) => Some(a),
            _ => None,
        }
    }

    /// Unweighted members whose sample value is exactly the share-weighted
    /// average of subgroup values for any partition.
    pub fn is_decomposable(self) -> bool {
        matches!(self, Measure::Fgt(_) | Measure::Chakravarty(_))
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Fgt(a) => write!(f, "fgt:{a}"),
            Measure::Chakravarty(a) => write!(f, "chakravarty:{a}"),
            Measure::Sen => f.write_str("sen"),
            Measure::Shorrocks => f.write_str("shorrocks"),
            Measure::Thon => f.write_str("thon"),
            Measure::Kakwani(k) => write!(f, "kakwani:{k}"),
        }
    }
}

/// Grammar reminder printed on parse failures.
pub const MEASURE_GRAMMAR: &str =
    "expected one of sen, shorrocks, thon, kakwani:K (K >= 1), fgt:A (A >= 0), chakravarty:A (A >= 0)";

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let param = param
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parameter(format!("bad measure parameter `{p}`; {MEASURE_GRAMMAR}")))
            })
            .transpose()?;
        let kind = match name.to_ascii_lowercase().as_str() {
            "fgt" => MeasureKind::Fgt,
            "chakravarty" => MeasureKind::Chakravarty,
            "sen" => MeasureKind::Sen,
            "shorrocks" => MeasureKind::Shorrocks,
            "thon" => MeasureKind::Thon,
            "kakwani" => MeasureKind::Kakwani,
            other => {
                return Err(Error::Parameter(format!(
                    "unknown measure `{other}`; {MEASURE_GRAMMAR}"
                )))
            }
        };
        Ok(*measure_spec(kind, param)?.measure())
    }
}

type NormalizerFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Everything needed to evaluate one index: the finite-sample ingredients
/// `(w, d, A, B, μ)` and, through [`crate::asymptotics::LimitWeights`], the
/// limiting pair `(c, π)` with its partial derivatives and the normalizer `h`.
#[derive(Clone)]
pub struct MeasureSpec {
    measure: Measure,
    h_override: Option<NormalizerFn>,
}

impl fmt::Debug for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeasureSpec")
            .field("measure", &self.measure)
            .field("custom_h", &self.h_override.is_some())
            .finish()
    }
}

/// Builds the spec for `kind`. The parameter must be given exactly for
/// `fgt`, `chakravarty` and `kakwani`.
pub fn measure_spec(kind: MeasureKind, parameter: Option<f64>) -> Result<MeasureSpec> {
    let needs = matches!(kind, MeasureKind::Fgt | MeasureKind::Chakravarty | MeasureKind::Kakwani);
    let measure = match (kind, parameter) {
        (MeasureKind::Fgt, Some(a)) => Measure::Fgt(a),
        (MeasureKind::Chakravarty, Some(a)) => Measure::Chakravarty(a),
        (MeasureKind::Kakwani, Some(k)) => Measure::Kakwani(k),
        (MeasureKind::Sen, None) => Measure::Sen,
        (MeasureKind::Shorrocks, None) => Measure::Shorrocks,
        (MeasureKind::Thon, None) => Measure::Thon,
        _ => {
            return Err(Error::Parameter(format!(
                "{kind:?} {} a parameter",
                if needs { "requires" } else { "takes no" }
            )))
        }
    };
    MeasureSpec::new(measure)
}

impl MeasureSpec {
    pub fn new(measure: Measure) -> Result<Self> {
        Ok(Self {
            measure: measure.validate()?,
            h_override: None,
        })
    }

    /// Replaces the default normalizer `h(n, Q)` used by the HD diagnostics.
    pub fn with_h(mut self, h: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.h_override = Some(Arc::new(h));
        self
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    /// Weight `w` applied to the shifted rank.
    pub fn weight(&self, u: f64) -> f64 {
        match self.measure {
            Measure::Fgt(_) | Measure::Chakravarty(_) => 1.0,
            Measure::Sen | Measure::Shorrocks | Measure::Thon => u,
            Measure::Kakwani(k) => u.powf(k),
        }
    }

    /// Deformation `d` of the normalized gap, in the (possibly transformed)
    /// income scale the generic sum runs on.
    pub fn deformation(&self, u: f64) -> f64 {
        match self.measure {
            Measure::Fgt(a) => u.powf(a),
            _ => u,
        }
    }

    /// Power transform applied to incomes and the line before summing:
    /// Chakravarty runs the headcount-normalized sum on `Y^α` against `Z^α`.
    pub fn income_transform(&self) -> Option<f64> {
        match self.measure {
            Measure::Chakravarty(a) => Some(a),
            _ => None,
        }
    }

    pub fn a_norm(&self, q: usize, n: usize, _z: f64) -> f64 {
        let (q, n) = (q as f64, n as f64);
        match self.measure {
            Measure::Shorrocks => q * (q + 1.0) / (2.0 * n),
            Measure::Thon => q * (q + 1.0) / (2.0 * (n + 1.0)),
            _ => q,
        }
    }

    /// `B(Q, n) = Σ_{i≤Q} w(i)`.
    pub fn b_norm(&self, q: usize, _n: usize) -> f64 {
        let qf = q as f64;
        match self.measure {
            Measure::Fgt(_) | Measure::Chakravarty(_) => qf,
            Measure::Sen | Measure::Shorrocks | Measure::Thon => qf * (qf + 1.0) / 2.0,
            Measure::Kakwani(k) => power_sum(q, k),
        }
    }

    /// Rank offsets `(μ₁, μ₂, μ₃, μ₄)`.
    pub fn offsets(&self) -> [f64; 4] {
        match self.measure {
            Measure::Shorrocks | Measure::Thon => [2.0, 0.0, 2.0, 1.0],
            _ => [0.0, 1.0, 1.0, 1.0],
        }
    }

    /// HD normalizer `h(n, Q)`.
    pub fn h(&self, n: f64, q: f64) -> f64 {
        if let Some(h) = &self.h_override {
            return h(n, q);
        }
        match self.measure {
            Measure::Fgt(_) | Measure::Chakravarty(_) => q,
            Measure::Sen => n * q,
            Measure::Kakwani(k) => q * n.powf(k),
            Measure::Shorrocks | Measure::Thon => q * (q + 1.0) / 2.0,
        }
    }

    /// `d` expressed on the original income scale, i.e. `γ(y) = d*((Z − y)/Z)`.
    pub fn gap_deformation(&self, u: f64) -> f64 {
        match self.measure {
            Measure::Fgt(a) => u.powf(a),
            Measure::Chakravarty(a) => 1.0 - (1.0 - u).max(0.0).powf(a),
            _ => u,
        }
    }
}

/// `Σ_{i=1}^{q} i^k`.
pub(crate) fn power_sum(q: usize, k: f64) -> f64 {
    (1..=q).map(|i| (i as f64).powf(k)).sum()
}

/// One index evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexValue {
    pub value: f64,
    /// Poor count `Q`.
    pub poor: usize,
    pub n: usize,
}

impl IndexValue {
    pub fn no_poor(&self) -> bool {
        self.poor == 0
    }
}

fn check_line(z: f64) -> Result<()> {
    if z.is_finite() && z > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("poverty line {z} must be positive and finite")))
    }
}

/// `(Q, Q/n)` with `Q = #{Y_i <= Z}`.
pub fn headcount(values: &EmpiricalDist, z: f64) -> Result<(usize, f64)> {
    check_line(z)?;
    let q = values.count_le(z);
    Ok((q, q as f64 / values.len() as f64))
}

/// Evaluates the generic weighted sum for `spec`.
pub fn compute_gpi(values: &EmpiricalDist, z: f64, spec: &MeasureSpec) -> Result<IndexValue> {
    check_line(z)?;
    let n = values.len();
    let (sorted, line): (std::borrow::Cow<'_, [f64]>, f64) = match spec.income_transform() {
        Some(a) => (
            values.sorted_values().iter().map(|y| y.powf(a)).collect::<Vec<_>>().into(),
            z.powf(a),
        ),
        None => (values.sorted_values().into(), z),
    };
    let q = sorted.partition_point(|&y| y <= line);
    if q == 0 {
        return Ok(IndexValue { value: 0.0, poor: 0, n });
    }
    let [m1, m2, m3, m4] = spec.offsets();
    let (nf, qf) = (n as f64, q as f64);
    let sum: f64 = sorted[..q]
        .iter()
        .enumerate()
        .map(|(j, &y)| {
            let rank = (j + 1) as f64;
            spec.weight(m1 * nf + m2 * qf - m3 * rank + m4) * spec.deformation((line - y) / line)
        })
        .sum();
    let value = spec.a_norm(q, n, z) / (nf * spec.b_norm(q, n)) * sum;
    Ok(IndexValue { value, poor: q, n })
}

/// Evaluates each measure's own textbook formula, bypassing the generic
/// `(A, B, w, μ)` machinery.
pub fn closed_form_index(values: &EmpiricalDist, z: f64, measure: Measure) -> Result<IndexValue> {
    check_line(z)?;
    let measure = measure.validate()?;
    let n = values.len();
    let q = values.count_le(z);
    let poor = &values.sorted_values()[..q];
    let nf = n as f64;
    let qf = q as f64;
    let gap = |y: f64| (z - y) / z;
    let value = if q == 0 {
        0.0
    } else {
        match measure {
            Measure::Fgt(a) => poor.iter().map(|&y| gap(y).powf(a)).sum::<f64>() / nf,
            Measure::Chakravarty(a) => poor.iter().map(|&y| 1.0 - (y / z).powf(a)).sum::<f64>() / nf,
            Measure::Sen => {
                let s: f64 = poor
                    .iter()
                    .enumerate()
                    .map(|(j, &y)| (qf - j as f64) * gap(y))
                    .sum();
                2.0 * s / (nf * (qf + 1.0))
            }
            Measure::Shorrocks | Measure::Thon => {
                let s: f64 = poor
                    .iter()
                    .enumerate()
                    .map(|(j, &y)| (2.0 * nf - 2.0 * (j + 1) as f64 + 1.0) * gap(y))
                    .sum();
                if measure == Measure::Thon {
                    s / (nf * (nf + 1.0))
                } else {
                    s / (nf * nf)
                }
            }
            Measure::Kakwani(k) => {
                let s: f64 = poor
                    .iter()
                    .enumerate()
                    .map(|(j, &y)| (qf - j as f64).powf(k) * gap(y))
                    .sum();
                qf * s / (nf * power_sum(q, k))
            }
        }
    };
    Ok(IndexValue { value, poor: q, n })
}
