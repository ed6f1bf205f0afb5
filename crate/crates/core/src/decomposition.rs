//! The gap of decomposability `gd_n = J_n − Σ (n_i/n) J_{n_i}` and its
//! plug-in asymptotic variance.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{influence_generic, Headcount, InfluencePair};
use crate::error::{Error, Result};
use crate::indices::{compute_gpi, IndexValue, Measure, MeasureSpec};
use crate::normal;
use crate::survey_data::{EmpiricalDist, GroupedSample};

/// Index value of one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupIndex {
    pub label: i64,
    pub n: usize,
    pub poor: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub gd: f64,
    pub global: IndexValue,
    pub groups: Vec<GroupIndex>,
}

/// Pooled index, per-stratum indices, and their gap.
pub fn gap(sample: &GroupedSample, z: f64, measure: Measure) -> Result<Gap> {
    let spec = MeasureSpec::new(measure)?;
    gap_with_spec(sample, z, &spec)
}

fn gap_with_spec(sample: &GroupedSample, z: f64, spec: &MeasureSpec) -> Result<Gap> {
    let pooled = sample.pooled_distribution();
    let global = compute_gpi(&pooled, z, spec)?;
    let n = sample.len() as f64;
    let mut groups = Vec::with_capacity(sample.num_groups());
    let mut weighted = 0.0;
    for (i, dist) in sample.group_distributions().iter().enumerate() {
        let v = compute_gpi(dist, z, spec)?;
        weighted += dist.len() as f64 / n * v.value;
        groups.push(GroupIndex {
            label: sample.labels()[i],
            n: dist.len(),
            poor: v.poor,
            value: v.value,
        });
    }
    // unweighted members are linear in the distribution; what remains is rounding
    let gd = if spec.measure().is_decomposable() {
        0.0
    } else {
        global.value - weighted
    };
    Ok(Gap {
        gd,
        global,
        groups,
    })
}

/// Share weights attached to the cross-stratum variance terms.
///
/// `Derived` (the default) is what a direct linearization of the gap gives:
/// `A₃₁: p_i²p_h`, `A₃₂: p_ip_jp_h`, `B₂, B₃: p_ip_j`. `Printed` reproduces the
/// alternative `p_ip_h²`, `√(p_ip_j)p_h²`, `p_i^{3/2}p_j^{1/2}` weights, kept
/// for comparison; they overstate the variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentWeights {
    #[default]
    Derived,
    Printed,
}

impl ComponentWeights {
    fn w31(self, pi: f64, ph: f64) -> f64 {
        match self {
            ComponentWeights::Derived => pi * pi * ph,
            ComponentWeights::Printed => pi * ph * ph,
        }
    }

    fn w32(self, pi: f64, pj: f64, ph: f64) -> f64 {
        match self {
            ComponentWeights::Derived => pi * pj * ph,
            ComponentWeights::Printed => (pi * pj).sqrt() * ph * ph,
        }
    }

    fn w2(self, pi: f64, pj: f64) -> f64 {
        match self {
            ComponentWeights::Derived => pi * pj,
            ComponentWeights::Printed => pi.powf(1.5) * pj.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    #[serde(rename = "A31")]
    pub a31: f64,
    #[serde(rename = "A32")]
    pub a32: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
    #[serde(rename = "B2")]
    pub b2: f64,
    #[serde(rename = "B3")]
    pub b3: f64,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    #[serde(rename = "M")]
    pub m: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Vec<f64>,
    pub theta1_sq: f64,
    pub theta2_sq: f64,
    pub theta3_sq: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// `Σ_s Σ_t (a_s ∧ b_t − a_s b_t) u_s v_t` for nondecreasing `a` and `b`,
/// in linear time.
pub fn kernel_sum(a: &[f64], u: &[f64], b: &[f64], v: &[f64]) -> f64 {
    debug_assert!(a.len() == u.len() && b.len() == v.len());
    debug_assert!(a.windows(2).all(|w| w[0] <= w[1]) && b.windows(2).all(|w| w[0] <= w[1]));
    // suffix[t] = Σ_{t' ≥ t} v, prefix[t] = Σ_{t' < t} b·v
    let mut suffix = vec![0.0; b.len() + 1];
    for t in (0..b.len()).rev() {
        suffix[t] = suffix[t + 1] + v[t];
    }
    let mut prefix = vec![0.0; b.len() + 1];
    for t in 0..b.len() {
        prefix[t + 1] = prefix[t] + b[t] * v[t];
    }
    let mut idx = 0;
    let mut min_part = 0.0;
    for (&a_s, &u_s) in a.iter().zip(u) {
        while idx < b.len() && b[idx] < a_s {
            idx += 1;
        }
        min_part += u_s * (a_s * suffix[idx] + prefix[idx]);
    }
    let au: f64 = a.iter().zip(u).map(|(x, y)| x * y).sum();
    min_part - au * prefix[b.len()]
}

/// Per-stratum quantities at the stratum's poor observations.
struct Stratum {
    n: usize,
    p: f64,
    /// Poor incomes, ascending.
    ys: Vec<f64>,
    /// `Ĝ_i` at `ys`.
    own_rank: Vec<f64>,
    /// Pooled `ν` at `ys`.
    nu: Vec<f64>,
    /// Pooled `g` at `ys`.
    g: Vec<f64>,
    ell: Vec<f64>,
    c: Vec<f64>,
    /// `ell_prefix[k] = Σ_{k' < k} ℓ`.
    ell_prefix: Vec<f64>,
    /// `(1/n_i) Σ ℓ`.
    ell_mean: f64,
}

impl Stratum {
    /// `L_i(y) = (1/n_i) Σ_{Y_ik ≤ y} ℓ_k`.
    fn ell_cum(&self, y: f64) -> f64 {
        self.ell_prefix[self.ys.partition_point(|&x| x <= y)] / self.n as f64
    }
}

fn influence_at(pair: &InfluencePair<'_>, dist: &EmpiricalDist, ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    ys.iter()
        .map(|&y| {
            let r = dist.empirical_cdf(y);
            (pair.g0_at(y, r), pair.nu0_at(y, r))
        })
        .unzip()
}

/// Plug-in `A₁ … B₃`, `F_h`, `M_h`, `H_h` and the three `θ²`.
pub fn variance_components(
    sample: &GroupedSample,
    z: f64,
    measure: Measure,
    weights: ComponentWeights,
) -> Result<VarianceComponents> {
    let spec = MeasureSpec::new(measure)?;
    let g = gap_with_spec(sample, z, &spec)?;
    variance_components_inner(sample, z, &spec, &g, weights)
}

fn variance_components_inner(
    sample: &GroupedSample,
    z: f64,
    spec: &MeasureSpec,
    gap: &Gap,
    weights: ComponentWeights,
) -> Result<VarianceComponents> {
    let mut warnings = Vec::new();
    let pooled = sample.pooled_distribution();
    match Headcount::of(&pooled, z) {
        Headcount::NonePoor => return Err(Error::NoPoor),
        status => warnings.extend(status.warning("pooled sample")),
    }
    let dists = sample.group_distributions();
    let big = influence_generic(spec, &pooled, z)?;
    let n = sample.len() as f64;
    let k = dists.len();

    let mut strata = Vec::with_capacity(k);
    for (i, dist) in dists.iter().enumerate() {
        let status = Headcount::of(dist, z);
        warnings.extend(status.warning(&format!("stratum {}", sample.labels()[i])));
        let q = dist.count_le(z);
        let ys = dist.sorted_values()[..q].to_vec();
        let own_rank: Vec<f64> = ys.iter().map(|&y| dist.empirical_cdf(y)).collect();
        let (g_big, nu_big) = influence_at(&big, &pooled, &ys);
        let p = dist.len() as f64 / n;
        let (g_own, nu_own) = if q == 0 {
            (Vec::new(), Vec::new())
        } else {
            let own = influence_generic(spec, dist, z)?;
            influence_at(&own, dist, &ys)
        };
        let ell: Vec<f64> = g_big.iter().zip(&g_own).map(|(a, b)| a - b).collect();
        let c: Vec<f64> = nu_big.iter().zip(&nu_own).map(|(a, b)| p * a - b).collect();
        let mut ell_prefix = vec![0.0; q + 1];
        for s in 0..q {
            ell_prefix[s + 1] = ell_prefix[s] + ell[s];
        }
        let ell_mean = ell_prefix[q] / dist.len() as f64;
        strata.push(Stratum {
            n: dist.len(),
            p,
            ys,
            own_rank,
            nu: nu_big,
            g: g_big,
            ell,
            c,
            ell_prefix,
            ell_mean,
        });
    }

    // rank_in[h][i] = Ĝ_h at stratum i's poor incomes
    let rank_in: Vec<Vec<Vec<f64>>> = dists
        .iter()
        .map(|dh| {
            strata
                .iter()
                .map(|s| s.ys.iter().map(|&y| dh.empirical_cdf(y)).collect())
                .collect()
        })
        .collect();

    let (mut a1, mut a2, mut a31, mut a32) = (0.0, 0.0, 0.0, 0.0);
    let (mut b1, mut b2, mut b3) = (0.0, 0.0, 0.0);
    for (i, si) in strata.iter().enumerate() {
        let ni = si.n as f64;
        let sq: f64 = si.ell.iter().map(|x| x * x).sum::<f64>() / ni;
        a1 += si.p * (sq - si.ell_mean * si.ell_mean);
        a2 += si.p / (ni * ni) * kernel_sum(&si.own_rank, &si.c, &si.own_rank, &si.c);
        let b1_inner: f64 = si
            .ys
            .iter()
            .enumerate()
            .map(|(s, _)| (si.ell_prefix[s + 1] / ni - si.own_rank[s] * si.ell_mean) * si.c[s])
            .sum();
        b1 += si.p / ni * b1_inner;

        for (h, sh) in strata.iter().enumerate() {
            if h == i {
                continue;
            }
            let r = &rank_in[h][i];
            a31 += weights.w31(si.p, sh.p) / (ni * ni) * kernel_sum(r, &si.nu, r, &si.nu);
        }
        for (j, sj) in strata.iter().enumerate() {
            if j == i {
                continue;
            }
            let nj = sj.n as f64;
            for (h, sh) in strata.iter().enumerate() {
                if h == i || h == j {
                    continue;
                }
                a32 += weights.w32(si.p, sj.p, sh.p) / (ni * nj)
                    * kernel_sum(&rank_in[h][i], &si.nu, &rank_in[h][j], &sj.nu);
            }
            let w2 = weights.w2(si.p, sj.p);
            b2 += w2 / (ni * nj) * kernel_sum(&si.own_rank, &si.c, &rank_in[i][j], &sj.nu);
            let b3_inner: f64 = sj
                .ys
                .iter()
                .zip(&rank_in[i][j])
                .zip(&sj.nu)
                .map(|((&y, &r), &v)| (si.ell_cum(y) - r * si.ell_mean) * v)
                .sum();
            b3 += w2 / nj * b3_inner;
        }
    }

    // H_h = (1/n) Σ_{pooled poor} Ĝ_h(Y) ν(Y)
    let h_vals: Vec<f64> = (0..k)
        .map(|h| {
            strata
                .iter()
                .enumerate()
                .map(|(i, si)| rank_in[h][i].iter().zip(&si.nu).map(|(r, v)| r * v).sum::<f64>())
                .sum::<f64>()
                / n
        })
        .collect();
    let mut f = Vec::with_capacity(k);
    let mut m = Vec::with_capacity(k);
    for (h, sh) in strata.iter().enumerate() {
        let eg = sh.g.iter().sum::<f64>() / sh.n as f64;
        let j_h = gap.groups[h].value;
        f.push(eg - j_h + h_vals[h]);
        m.push(eg + h_vals[h]);
    }
    let shares: Vec<f64> = strata.iter().map(|s| s.p).collect();
    let theta2_sq = discrete_variance(&f, &shares);
    let theta3_sq = discrete_variance(&m, &shares);

    let mut theta1_sq = a1 + a2 + a31 + a32 + 2.0 * (b1 + b2 + b3);
    if theta1_sq < 0.0 {
        if theta1_sq > -1e-10 {
            warnings.push(format!("theta1^2 = {theta1_sq:e} clamped to 0"));
            theta1_sq = 0.0;
        } else {
            return Err(Error::NegativeVariance(theta1_sq));
        }
    }

    Ok(VarianceComponents {
        a1,
        a2,
        a31,
        a32,
        b1,
        b2,
        b3,
        f,
        m,
        h: h_vals,
        theta1_sq,
        theta2_sq,
        theta3_sq,
        warnings,
    })
}

/// `Σ p x² − (Σ p x)²`, computed around the mean so it cannot go negative.
fn discrete_variance(x: &[f64], p: &[f64]) -> f64 {
    let mean: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
    x.iter().zip(p).map(|(a, b)| b * (a - mean) * (a - mean)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn half_width(&self) -> f64 {
        (self.upper - self.lower) / 2.0
    }
}

/// `gd ± z_{(1+level)/2} · √(θ²/n)`.
pub fn confidence_interval(gd: f64, theta_sq: f64, n: usize, level: f64) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level {level} must lie in (0, 1)")));
    }
    if !(theta_sq >= 0.0) || n == 0 {
        return Err(Error::Domain(format!(
            "need theta^2 >= 0 and n >= 1, got {theta_sq} and {n}"
        )));
    }
    let half = normal::quantile((1.0 + level) / 2.0) * (theta_sq / n as f64).sqrt();
    Ok(Interval {
        lower: gd - half,
        upper: gd + half,
    })
}

/// Everything `decompose` reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub measure: Measure,
    #[serde(rename = "Z")]
    pub z: f64,
    pub n: usize,
    pub level: f64,
    pub global_index: f64,
    pub global_poor: usize,
    pub group_indices: Vec<GroupIndex>,
    pub gd_n: f64,
    pub components: VarianceComponents,
    /// Uses `θ₁² + θ₂²`.
    pub ci_gd: Interval,
    /// Uses `θ₁² + θ₃²`, the interval for the random centering.
    pub ci_gd0: Interval,
    pub decomposable: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub level: f64,
    pub weights: ComponentWeights,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            level: 0.95,
            weights: ComponentWeights::Derived,
        }
    }
}

pub fn decompose(sample: &GroupedSample, z: f64, measure: Measure, level: f64) -> Result<GapReport> {
    decompose_with(
        sample,
        z,
        measure,
        &DecomposeOptions {
            level,
            ..Default::default()
        },
    )
}

pub fn decompose_with(
    sample: &GroupedSample,
    z: f64,
    measure: Measure,
    options: &DecomposeOptions,
) -> Result<GapReport> {
    if !(options.level > 0.0 && options.level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level {} must lie in (0, 1)",
            options.level
        )));
    }
    let spec = MeasureSpec::new(measure)?;
    let g = gap_with_spec(sample, z, &spec)?;
    let components = variance_components_inner(sample, z, &spec, &g, options.weights)?;
    let n = sample.len();
    let ci_gd = confidence_interval(g.gd, components.theta1_sq + components.theta2_sq, n, options.level)?;
    let ci_gd0 = confidence_interval(g.gd, components.theta1_sq + components.theta3_sq, n, options.level)?;
    let mut warnings = components.warnings.clone();
    let decomposable = measure.is_decomposable();
    if decomposable {
        warnings.push(format!("{measure} is a decomposable measure: the gap is zero by construction"));
    }
    Ok(GapReport {
        measure,
        z,
        n,
        level: options.level,
        global_index: g.global.value,
        global_poor: g.global.poor,
        group_indices: g.groups,
        gd_n: g.gd,
        components,
        ci_gd,
        ci_gd0,
        decomposable,
        warnings,
    })
}
