//! Limiting objects behind the index family: the exact index `J(G)`, the
//! functionals `H_c`, `H_π`, `K_c`, `K_π`, `K`, and the influence pair
//! `(g₀, ν₀)`. Also finite-sample diagnostics for the rank-weight
//! approximations that make the limit theory work.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distribution::{power_weight_integral, quantile_integral, IncomeDistribution};
use crate::error::{Error, Result};
use crate::indices::{Measure, MeasureSpec};
use crate::quadrature::graded_integral;

/// The limiting weight pair `(c, π)` of an index with its first partials.
///
/// `x` plays the role of the headcount `G(Z)` and `y` of the rank `G(Y)`.
pub trait LimitWeights {
    fn c(&self, x: f64, y: f64) -> f64;
    fn pi(&self, x: f64, y: f64) -> f64;
    fn dc_dx(&self, x: f64, y: f64) -> f64;
    fn dc_dy(&self, x: f64, y: f64) -> f64;
    fn dpi_dx(&self, x: f64, y: f64) -> f64;
    fn dpi_dy(&self, x: f64, y: f64) -> f64;

    /// Deformation of the normalized gap `(Z − y)/Z` on the original scale.
    fn gamma(&self, u: f64) -> f64;

    /// True when `H_π` does not depend on the headcount. The normalizer then
    /// carries no sampling variability and its terms drop out of `g₀`, `ν₀`, `K`.
    fn constant_normalizer(&self) -> bool {
        false
    }
}

impl LimitWeights for MeasureSpec {
    fn c(&self, x: f64, y: f64) -> f64 {
        match *self.measure() {
            Measure::Fgt(_) | Measure::Chakravarty(_) => 1.0,
            Measure::Sen => x - y,
            Measure::Kakwani(k) => (x - y).max(0.0).powf(k),
            Measure::Shorrocks | Measure::Thon => 2.0 * (1.0 - y),
        }
    }

    fn pi(&self, x: f64, y: f64) -> f64 {
        match *self.measure() {
            Measure::Fgt(_) | Measure::Chakravarty(_) => 1.0 / x,
            Measure::Sen => y / x,
            Measure::Kakwani(k) => y.powf(k) / x,
            Measure::Shorrocks | Measure::Thon => 2.0 * y / (x * x),
        }
    }

    fn dc_dx(&self, x: f64, y: f64) -> f64 {
        match *self.measure() {
            Measure::Sen => 1.0,
            Measure::Kakwani(k) => k * (x - y).max(0.0).powf(k - 1.0),
            _ => 0.0,
        }
    }

    fn dc_dy(&self, x: f64, y: f64) -> f64 {
        match *self.measure() {
            Measure::Fgt(_) | Measure::Chakravarty(_) => 0.0,
            Measure::Sen => -1.0,
            Measure::Kakwani(k) => -k * (x - y).max(0.0).powf(k - 1.0),
            Measure::Shorrocks | Measure::Thon => -2.0,
        }
    }

    fn dpi_dx(&self, x: f64, y: f64) -> f64 {
        match *self.measure() {
            Measure::Fgt(_) | Measure::Chakravarty(_) => -1.0 / (x * x),
            Measure::Sen => -y / (x * x),
            Measure::Kakwani(k) => -y.powf(k) / (x * x),
            Measure::Shorrocks | Measure::Thon => -4.0 * y / (x * x * x),
        }
    }

    fn dpi_dy(&self, x: f64, y: f64) -> f64 {
        match *self.measure() {
            Measure::Fgt(_) | Measure::Chakravarty(_) => 0.0,
            Measure::Sen => 1.0 / x,
            Measure::Kakwani(k) => k * y.powf(k - 1.0) / x,
            Measure::Shorrocks | Measure::Thon => 2.0 / (x * x),
        }
    }

    fn gamma(&self, u: f64) -> f64 {
        self.gap_deformation(u)
    }

    fn constant_normalizer(&self) -> bool {
        !matches!(self.measure(), Measure::Sen | Measure::Kakwani(_))
    }
}

/// `γ(y)`; zero above the line.
fn gap_weight<W: LimitWeights + ?Sized>(w: &W, z: f64, y: f64) -> f64 {
    if y > z {
        0.0
    } else {
        w.gamma(((z - y) / z).max(0.0))
    }
}

/// Where the headcount `G(Z)` sits relative to the open unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Headcount {
    NonePoor,
    Interior,
    AllPoor,
}

impl Headcount {
    pub fn of<D: IncomeDistribution + ?Sized>(dist: &D, z: f64) -> Self {
        let q = dist.cdf(z);
        if q <= 0.0 {
            Headcount::NonePoor
        } else if q >= 1.0 {
            Headcount::AllPoor
        } else {
            Headcount::Interior
        }
    }

    /// Warning text when the headcount is degenerate.
    pub fn warning(self, what: &str) -> Option<String> {
        match self {
            Headcount::Interior => None,
            Headcount::NonePoor => Some(format!("{what}: no observation at or below the line")),
            Headcount::AllPoor => Some(format!("{what}: every observation is at or below the line")),
        }
    }
}

fn check_line(z: f64) -> Result<()> {
    if z.is_finite() && z > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("poverty line {z} must be positive and finite")))
    }
}

/// `J(G)` from each measure's own quantile-integral form.
///
/// For an empirical law the integral is an exact finite sum over quantile steps.
/// Returns 0 when nobody is poor.
pub fn exact_index<D: IncomeDistribution + ?Sized>(measure: Measure, dist: &D, z: f64) -> Result<f64> {
    check_line(z)?;
    let measure = measure.validate()?;
    let q = dist.cdf(z).min(1.0);
    if q <= 0.0 {
        return Ok(0.0);
    }
    let gap = |x: f64| ((z - x) / z).max(0.0);
    Ok(match measure {
        Measure::Fgt(a) => quantile_integral(dist, q, |_, x| gap(x).powf(a)),
        Measure::Chakravarty(a) => quantile_integral(dist, q, |_, x| 1.0 - (x.min(z) / z).powf(a)),
        Measure::Sen => 2.0 * power_weight_integral(dist, q, 1.0, gap),
        Measure::Kakwani(k) => (k + 1.0) * power_weight_integral(dist, q, k, gap),
        Measure::Shorrocks | Measure::Thon => quantile_integral(dist, q, |s, x| 2.0 * (1.0 - s) * gap(x)),
    })
}

/// The scalars of the limit theory for one law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub h_c: f64,
    pub h_pi: f64,
    pub k_c: f64,
    pub k_pi: f64,
    pub k: f64,
    /// `H_c / H_π`.
    pub j: f64,
    /// Headcount `G(Z)`.
    pub q: f64,
}

/// Generic construction from `(c, π)` and their partials.
pub fn functionals<W, D>(weights: &W, dist: &D, z: f64) -> Result<Functionals>
where
    W: LimitWeights + ?Sized,
    D: IncomeDistribution + ?Sized,
{
    check_line(z)?;
    let q = dist.cdf(z).min(1.0);
    if q <= 0.0 {
        return Err(Error::Assumption(
            "H_c and H_pi vanish: nobody is at or below the line".into(),
        ));
    }
    let h_c = quantile_integral(dist, q, |s, x| weights.c(q, s) * gap_weight(weights, z, x));
    let h_pi = graded_integral(0.0, q, |s| weights.pi(q, s));
    if !(h_pi > 0.0 && h_pi.is_finite()) || !(h_c > 0.0 && h_c.is_finite()) {
        return Err(Error::Assumption(format!(
            "need 0 < H_c, H_pi < inf; got H_c = {h_c}, H_pi = {h_pi}"
        )));
    }
    let k_c = quantile_integral(dist, q, |s, x| weights.dc_dx(q, s) * gap_weight(weights, z, x));
    let j = h_c / h_pi;
    let (k_pi, k) = if weights.constant_normalizer() {
        (0.0, k_c / h_pi)
    } else {
        let k_pi = graded_integral(0.0, q, |s| weights.dpi_dx(q, s));
        (k_pi, k_c / h_pi - j / h_pi * k_pi)
    };
    Ok(Functionals { h_c, h_pi, k_c, k_pi, k, j, q })
}

#[derive(Debug, Clone, Copy)]
enum Form {
    Generic,
    Sen,
    Shorrocks,
    Kakwani(f64),
}

/// Influence functions `g₀`, `ν₀` of the index at one law.
///
/// Evaluation needs `G₀(y)`; [`InfluencePair::g0_at`] and
/// [`InfluencePair::nu0_at`] accept it precomputed.
pub struct InfluencePair<'a> {
    weights: &'a (dyn LimitWeights + Sync),
    dist: &'a dyn IncomeDistribution,
    z: f64,
    form: Form,
    q: f64,
    j: f64,
    k: f64,
    h_c: f64,
    h_pi: f64,
}

impl fmt::Debug for InfluencePair<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InfluencePair")
            .field("form", &self.form)
            .field("z", &self.z)
            .field("q", &self.q)
            .field("j", &self.j)
            .field("k", &self.k)
            .finish()
    }
}

impl<'a> InfluencePair<'a> {
    pub fn z(&self) -> f64 {
        self.z
    }

    /// `J(G₀)`.
    pub fn j(&self) -> f64 {
        self.j
    }

    /// `K(G₀)`.
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn headcount(&self) -> f64 {
        self.q
    }

    pub fn g0(&self, y: f64) -> f64 {
        if y > self.z {
            0.0
        } else {
            self.g0_bar(y)
        }
    }

    pub fn nu0(&self, y: f64) -> f64 {
        if y > self.z {
            0.0
        } else {
            self.nu0_bar(y)
        }
    }

    /// Unrestricted factor of `g₀`.
    pub fn g0_bar(&self, y: f64) -> f64 {
        self.g0_at(y, self.dist.cdf(y))
    }

    pub fn nu0_bar(&self, y: f64) -> f64 {
        self.nu0_at(y, self.dist.cdf(y))
    }

    /// `ḡ₀(y)` given `rank = G₀(y)`.
    pub fn g0_at(&self, y: f64, rank: f64) -> f64 {
        let (q, j, k) = (self.q, self.j, self.k);
        let gamma = gap_weight(self.weights, self.z, y);
        match self.form {
            Form::Sen => 2.0 * ((1.0 - rank / q) * gamma - rank / q * (j / q)) + k,
            Form::Shorrocks => 2.0 * (1.0 - rank) * gamma,
            Form::Kakwani(p) => {
                let r = (rank / q).min(1.0);
                (p + 1.0) * ((1.0 - r).powf(p) * gamma - j / q * r.powf(p)) + k
            }
            Form::Generic => {
                let w = self.weights;
                let mut g = w.c(q, rank) * gamma / self.h_pi + k;
                if !w.constant_normalizer() {
                    g -= self.h_c / (self.h_pi * self.h_pi) * w.pi(q, rank);
                }
                g
            }
        }
    }

    /// `ν̄₀(y)` given `rank = G₀(y)`.
    pub fn nu0_at(&self, y: f64, rank: f64) -> f64 {
        let (q, j) = (self.q, self.j);
        let gamma = gap_weight(self.weights, self.z, y);
        match self.form {
            Form::Sen => -2.0 / q * (gamma + j / q),
            Form::Shorrocks => -2.0 * gamma,
            Form::Kakwani(p) => {
                let r = (rank / q).min(1.0);
                -p * (p + 1.0) / q * ((1.0 - r).powf(p - 1.0) * gamma + j / q * r.powf(p - 1.0))
            }
            Form::Generic => {
                let w = self.weights;
                let mut v = w.dc_dy(q, rank) * gamma / self.h_pi;
                if !w.constant_normalizer() {
                    v -= self.h_c / (self.h_pi * self.h_pi) * w.dpi_dy(q, rank);
                }
                v
            }
        }
    }
}

/// Influence pair from the generic construction.
pub fn influence_generic<'a, W, D>(weights: &'a W, dist: &'a D, z: f64) -> Result<InfluencePair<'a>>
where
    W: LimitWeights + Sync,
    D: IncomeDistribution,
{
    let f = functionals(weights, dist, z)?;
    Ok(InfluencePair {
        weights,
        dist,
        z,
        form: Form::Generic,
        q: f.q,
        j: f.j,
        k: f.k,
        h_c: f.h_c,
        h_pi: f.h_pi,
    })
}

/// Influence pair from the worked-out displays for Sen, Shorrocks (and Thon,
/// which shares its limit) and Kakwani.
pub fn influence_closed_form<'a, D>(spec: &'a MeasureSpec, dist: &'a D, z: f64) -> Result<InfluencePair<'a>>
where
    D: IncomeDistribution,
{
    check_line(z)?;
    let measure = *spec.measure();
    let form = match measure {
        Measure::Sen => Form::Sen,
        Measure::Shorrocks | Measure::Thon => Form::Shorrocks,
        Measure::Kakwani(k) => Form::Kakwani(k),
        other => {
            return Err(Error::Unsupported(format!(
                "no weighted closed-form influence functions for {other}"
            )))
        }
    };
    let q = dist.cdf(z).min(1.0);
    if q <= 0.0 {
        return Err(Error::NoPoor);
    }
    let j = exact_index(measure, dist, z)?;
    let gap = |x: f64| ((z - x) / z).max(0.0);
    let k = match form {
        Form::Sen => {
            let int_quantile = quantile_integral(dist, q, |_, x| x);
            2.0 * (1.0 - int_quantile / (z * q)) + j / q
        }
        Form::Kakwani(p) => p * (p + 1.0) / q * power_weight_integral(dist, q, p - 1.0, gap) + j / q,
        _ => 0.0,
    };
    Ok(InfluencePair {
        weights: spec,
        dist,
        z,
        form,
        q,
        j,
        k,
        h_c: f64::NAN,
        h_pi: f64::NAN,
    })
}

/// Finite-sample deviations of the rank weights from their limits:
/// `dev1 = max_j |A·w(μ₁n+μ₂Q−μ₃j+μ₄)/h − c(Q/n, j/n)|` and
/// `dev2 = max_j |w(j)/h − π(Q/n, j/n)/n|`.
pub fn hd_diagnostic(spec: &MeasureSpec, n: usize, q: usize) -> (f64, f64) {
    let (nf, qf) = (n as f64, q as f64);
    let h = spec.h(nf, qf);
    let a = spec.a_norm(q, n, 1.0);
    let [m1, m2, m3, m4] = spec.offsets();
    let x = qf / nf;
    let mut dev1: f64 = 0.0;
    let mut dev2: f64 = 0.0;
    for j in 1..=q {
        let jf = j as f64;
        let y = jf / nf;
        let w = spec.weight(m1 * nf + m2 * qf - m3 * jf + m4);
        dev1 = dev1.max((a * w / h - spec.c(x, y)).abs());
        dev2 = dev2.max((spec.weight(jf) / h - spec.pi(x, y) / nf).abs());
    }
    (dev1, dev2)
}
