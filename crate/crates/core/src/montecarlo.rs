//! Simulation harness: draw stratified samples from parametric mixtures,
//! compute the population gap by quadrature, and check the normal
//! approximation of the estimated gap.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::exact_index;
use crate::decomposition::decompose;
use crate::distribution::{IncomeDistribution, Mixture, Parametric};
use crate::error::{Error, Result};
use crate::indices::Measure;
use crate::normal;
use crate::survey_data::GroupedSample;

/// Stratum shares and income laws. Stratum `i` (0-based) gets label `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture", into = "RawMixture")]
pub struct MixtureSpec {
    mixture: Mixture,
}

#[derive(Serialize, Deserialize)]
struct RawMixture {
    p: Vec<f64>,
    components: Vec<Parametric>,
}

impl TryFrom<RawMixture> for MixtureSpec {
    type Error = Error;

    fn try_from(raw: RawMixture) -> Result<Self> {
        MixtureSpec::new(raw.p, raw.components)
    }
}

impl From<MixtureSpec> for RawMixture {
    fn from(m: MixtureSpec) -> Self {
        RawMixture {
            p: m.mixture.weights().to_vec(),
            components: m.mixture.components().to_vec(),
        }
    }
}

impl MixtureSpec {
    pub fn new(p: Vec<f64>, components: Vec<Parametric>) -> Result<Self> {
        Ok(Self {
            mixture: Mixture::new(p, components)?,
        })
    }

    pub fn num_groups(&self) -> usize {
        self.mixture.weights().len()
    }

    pub fn shares(&self) -> &[f64] {
        self.mixture.weights()
    }

    pub fn components(&self) -> &[Parametric] {
        self.mixture.components()
    }

    /// The pooled law `Σ p_i G_i`.
    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of replication `rep` under master seed `seed`.
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    splitmix64(seed ^ splitmix64(rep))
}

/// `n` independent trials: a stratum from `p`, then an income from that
/// stratum's law. Strata that receive no trial are absent from the sample.
pub fn draw_grouped_sample(mix: &MixtureSpec, n: usize, seed: u64) -> Result<GroupedSample> {
    if n == 0 {
        return Err(Error::Parameter("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shares = mix.shares();
    let last = shares.len() - 1;
    let mut incomes = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut i = last;
        for (k, p) in shares.iter().enumerate() {
            acc += p;
            if u < acc {
                i = k;
                break;
            }
        }
        incomes.push(mix.components()[i].sample(&mut rng));
        labels.push(i as i64 + 1);
    }
    GroupedSample::from_labels(incomes, &labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueGap {
    pub gd: f64,
    pub global: f64,
    pub groups: Vec<f64>,
}

/// Population gap `J(G) − Σ p_i J(G_i)` by quadrature.
pub fn true_gap(mix: &MixtureSpec, z: f64, measure: Measure) -> Result<TrueGap> {
    for (i, c) in mix.components().iter().enumerate() {
        let q = c.cdf(z);
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Assumption(format!(
                "component {} has headcount {q} at the line; need 0 < G(Z) < 1",
                i + 1
            )));
        }
    }
    let groups = mix
        .components()
        .iter()
        .map(|c| exact_index(measure, c, z))
        .collect::<Result<Vec<_>>>()?;
    let weighted: f64 = groups.iter().zip(mix.shares()).map(|(j, p)| j * p).sum();
    if measure.is_decomposable() || mix.num_groups() == 1 {
        // linear in G: the gap vanishes identically
        return Ok(TrueGap { gd: 0.0, global: weighted, groups });
    }
    let global = exact_index(measure, mix.mixture(), z)?;
    Ok(TrueGap {
        gd: global - weighted,
        global,
        groups,
    })
}

/// Sup-distance between the empirical CDF of `values` and `cdf`.
pub fn ks_statistic(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            f64::max((i + 1) as f64 / m - f, f - i as f64 / m)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
pub fn ks_pvalue(d: f64, m: usize) -> f64 {
    let sm = (m as f64).sqrt();
    let lambda = (sm + 0.12 + 0.11 / sm) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Neumaier-compensated sum in slice order.
fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0_f64, 0.0_f64);
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub reps: usize,
    pub n: usize,
    pub true_gd: f64,
    pub mean_gd_n: f64,
    /// `√n (gd_n − gd)` per replication, in replication order.
    pub gd_samples: Vec<f64>,
    pub mean_plugin_theta_sq: f64,
    pub empirical_var: f64,
    pub coverage: f64,
    /// KS distance of the studentized gaps from N(0, 1); absent when every
    /// plug-in variance is zero.
    pub ks_stat: Option<f64>,
    pub ks_pvalue: Option<f64>,
}

struct Replication {
    normalized: f64,
    gd_n: f64,
    theta_sq: f64,
    covered: bool,
}

/// Repeats draw → decompose → interval `reps` times in parallel.
///
/// Every replication has its own generator seeded from `(seed, index)`, and
/// results are reduced in replication order, so output is reproducible
/// regardless of thread count.
pub fn run_experiment(
    mix: &MixtureSpec,
    z: f64,
    measure: Measure,
    n: usize,
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<SimResult> {
    if reps < 100 {
        return Err(Error::Parameter(format!("need at least 100 replications, got {reps}")));
    }
    let truth = true_gap(mix, z, measure)?;
    let sqrt_n = (n as f64).sqrt();
    let out: Vec<Result<Replication>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let sample = draw_grouped_sample(mix, n, replication_seed(seed, r as u64))?;
            let report = decompose(&sample, z, measure, level)?;
            Ok(Replication {
                normalized: sqrt_n * (report.gd_n - truth.gd),
                gd_n: report.gd_n,
                theta_sq: report.components.theta1_sq + report.components.theta2_sq,
                covered: report.ci_gd.contains(truth.gd),
            })
        })
        .collect();
    let out = out.into_iter().collect::<Result<Vec<_>>>()?;

    let m = reps as f64;
    let gd_samples: Vec<f64> = out.iter().map(|r| r.normalized).collect();
    let mean_norm = compensated_sum(gd_samples.iter().copied()) / m;
    let empirical_var =
        compensated_sum(gd_samples.iter().map(|x| (x - mean_norm) * (x - mean_norm))) / (m - 1.0);
    let mean_plugin_theta_sq = compensated_sum(out.iter().map(|r| r.theta_sq)) / m;
    let coverage = out.iter().filter(|r| r.covered).count() as f64 / m;
    let studentized: Vec<f64> = out
        .iter()
        .filter(|r| r.theta_sq > 0.0)
        .map(|r| r.normalized / r.theta_sq.sqrt())
        .collect();
    let (ks_stat, ks_p) = if studentized.is_empty() {
        (None, None)
    } else {
        let d = ks_statistic(&studentized, normal::cdf);
        (Some(d), Some(ks_pvalue(d, studentized.len())))
    };
    Ok(SimResult {
        reps,
        n,
        true_gd: truth.gd,
        mean_gd_n: compensated_sum(out.iter().map(|r| r.gd_n)) / m,
        gd_samples,
        mean_plugin_theta_sq,
        empirical_var,
        coverage,
        ks_stat,
        ks_pvalue: ks_p,
    })
}

/// Where the poverty line comes from in a config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSpec {
    Value(f64),
    /// A quantile of the pooled mixture.
    Quantile(f64),
}

impl LineSpec {
    pub fn resolve(self, mix: &MixtureSpec) -> Result<f64> {
        match self {
            LineSpec::Value(z) => Ok(z),
            LineSpec::Quantile(t) if t > 0.0 && t < 1.0 => Ok(mix.mixture().quantile(t)),
            LineSpec::Quantile(t) => Err(Error::Config(format!("line quantile {t} outside (0, 1)"))),
        }
    }
}

/// A simulation experiment read from a `key = value` file.
///
/// ```text
/// # comments start with '#'
/// K = 2
/// p = 0.6, 0.4
/// components = lognormal(0, 1); singh_maddala(2.8, 1.1, 1.7)
/// Z = quantile(0.4)
/// measure = sen
/// n = 500
/// reps = 200
/// level = 0.95
/// seed = 7
/// ```
///
/// Families: `lognormal(mu, sigma)`, `singh_maddala(a, b, q)`,
/// `pareto(scale, shape)`, `uniform(lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mixture: MixtureSpec,
    pub line: LineSpec,
    pub measure: Measure,
    pub n: usize,
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn run(&self) -> Result<SimResult> {
        let z = self.line.resolve(&self.mixture)?;
        run_experiment(&self.mixture, z, self.measure, self.n, self.reps, self.level, self.seed)
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{}`", v.trim())))
}

fn parse_call(s: &str) -> Option<(&str, Vec<&str>)> {
    let s = s.trim();
    let open = s.find('(')?;
    let inner = s[open + 1..].strip_suffix(')')?;
    Some((s[..open].trim(), inner.split(',').map(str::trim).collect()))
}

fn parse_family(s: &str) -> Result<Parametric> {
    let (name, args) =
        parse_call(s).ok_or_else(|| Error::Config(format!("bad component `{}`", s.trim())))?;
    let nums = args
        .iter()
        .map(|a| parse_num::<f64>("components", a))
        .collect::<Result<Vec<_>>>()?;
    let arity = |k: usize| {
        if nums.len() == k {
            Ok(())
        } else {
            Err(Error::Config(format!("{name} takes {k} parameters, got {}", nums.len())))
        }
    };
    let fam = match name.to_ascii_lowercase().as_str() {
        "lognormal" => {
            arity(2)?;
            Parametric::LogNormal { mu: nums[0], sigma: nums[1] }
        }
        "singh_maddala" => {
            arity(3)?;
            Parametric::SinghMaddala { a: nums[0], b: nums[1], q: nums[2] }
        }
        "pareto" => {
            arity(2)?;
            Parametric::Pareto { scale: nums[0], shape: nums[1] }
        }
        "uniform" => {
            arity(2)?;
            Parametric::Uniform { lo: nums[0], hi: nums[1] }
        }
        other => return Err(Error::Config(format!("unknown family `{other}`"))),
    };
    fam.validate()?;
    Ok(fam)
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut k: Option<usize> = None;
        let mut p = None;
        let mut comps = None;
        let mut line = None;
        let mut measure = None;
        let (mut n, mut reps, mut level, mut seed) = (None, None, 0.95, 0u64);
        for (lineno, raw) in text.lines().enumerate() {
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let (key, val) = l
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, val) = (key.trim(), val.trim());
            match key {
                "K" => k = Some(parse_num(key, val)?),
                "p" => {
                    p = Some(val.split(',').map(|x| parse_num::<f64>(key, x)).collect::<Result<Vec<_>>>()?)
                }
                "components" => {
                    comps = Some(val.split(';').map(parse_family).collect::<Result<Vec<_>>>()?)
                }
                "Z" => {
                    line = Some(match parse_call(val) {
                        Some(("quantile", args)) if args.len() == 1 => {
                            LineSpec::Quantile(parse_num(key, args[0])?)
                        }
                        _ => LineSpec::Value(parse_num(key, val)?),
                    })
                }
                "measure" => measure = Some(val.parse::<Measure>()?),
                "n" => n = Some(parse_num(key, val)?),
                "reps" => reps = Some(parse_num(key, val)?),
                "level" => level = parse_num(key, val)?,
                "seed" => seed = parse_num(key, val)?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        let missing = |what: &str| Error::Config(format!("missing key `{what}`"));
        let p: Vec<f64> = p.ok_or_else(|| missing("p"))?;
        let comps: Vec<Parametric> = comps.ok_or_else(|| missing("components"))?;
        if let Some(k) = k {
            if k != p.len() || k != comps.len() {
                return Err(Error::Config(format!(
                    "K = {k} but {} shares and {} components given",
                    p.len(),
                    comps.len()
                )));
            }
        }
        Ok(Self {
            mixture: MixtureSpec::new(p, comps)?,
            line: line.ok_or_else(|| missing("Z"))?,
            measure: measure.ok_or_else(|| missing("measure"))?,
            n: n.ok_or_else(|| missing("n"))?,
            reps: reps.ok_or_else(|| missing("reps"))?,
            level,
            seed,
        })
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "K = {}", self.mixture.num_groups())?;
        let p: Vec<String> = self.mixture.shares().iter().map(f64::to_string).collect();
        writeln!(f, "p = {}", p.join(", "))?;
        let comps: Vec<String> = self
            .mixture
            .components()
            .iter()
            .map(|c| match *c {
                Parametric::LogNormal { mu, sigma } => format!("lognormal({mu}, {sigma})"),
                Parametric::SinghMaddala { a, b, q } => format!("singh_maddala({a}, {b}, {q})"),
                Parametric::Pareto { scale, shape } => format!("pareto({scale}, {shape})"),
                Parametric::Uniform { lo, hi } => format!("uniform({lo}, {hi})"),
            })
            .collect();
        writeln!(f, "components = {}", comps.join("; "))?;
        match self.line {
            LineSpec::Value(z) => writeln!(f, "Z = {z}")?,
            LineSpec::Quantile(t) => writeln!(f, "Z = quantile({t})")?,
        }
        writeln!(f, "measure = {}", self.measure)?;
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "reps = {}", self.reps)?;
        writeln!(f, "level = {}", self.level)?;
        write!(f, "seed = {}", self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lognormals() -> MixtureSpec {
        MixtureSpec::new(
            vec![0.5, 0.3, 0.2],
            vec![
                Parametric::LogNormal { mu: 0.0, sigma: 1.0 },
                Parametric::LogNormal { mu: 0.3, sigma: 1.0 },
                Parametric::LogNormal { mu: 0.6, sigma: 0.8 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn ks_examples() {
        let m = 100;
        let v: Vec<f64> = (1..=m).map(|i| normal::quantile((i as f64 - 0.5) / m as f64)).collect();
        assert!((ks_statistic(&v, normal::cdf) - 0.005).abs() < 1e-12);
        assert!((ks_statistic(&[0.0], normal::cdf) - 0.5).abs() < 1e-15);
        assert!(ks_statistic(&[1e6], normal::cdf) >= 0.999_999);
    }

    #[test]
    fn ks_pvalue_sane() {
        assert_eq!(ks_pvalue(0.0, 100), 1.0);
        // critical value at 5% for large m is about 1.358/√m
        let p = ks_pvalue(1.358 / 1000f64.sqrt(), 1000);
        assert!((p - 0.05).abs() < 0.005, "{p}");
        assert!(ks_pvalue(0.5, 1000) < 1e-10);
    }

    #[test]
    fn single_share_gives_one_label() {
        let mix = MixtureSpec::new(vec![1.0], vec![Parametric::Uniform { lo: 0.0, hi: 1.0 }]).unwrap();
        let s = draw_grouped_sample(&mix, 50, 3).unwrap();
        assert_eq!(s.labels(), &[1]);
        assert_eq!(true_gap(&mix, 0.5, Measure::Sen).unwrap().gd, 0.0);
    }

    #[test]
    fn draws_are_reproducible() {
        let mix = MixtureSpec::new(
            vec![0.5, 0.5],
            vec![Parametric::Uniform { lo: 0.0, hi: 1.0 }, Parametric::Pareto { scale: 1.0, shape: 3.0 }],
        )
        .unwrap();
        let a = draw_grouped_sample(&mix, 10_000, 11).unwrap();
        let b = draw_grouped_sample(&mix, 10_000, 11).unwrap();
        assert_eq!(a, b);
        let share = a.counts()[0] as f64 / 1e4;
        assert!((share - 0.5).abs() < 0.02);
    }

    #[test]
    fn reference_mixture_gap() {
        let mix = lognormals();
        let z = mix.mixture().quantile(0.4);
        assert!((z - 0.974_662_828_476_239_4).abs() < 1e-9);
        let t = true_gap(&mix, z, Measure::Sen).unwrap();
        assert!((t.global - 0.235_708_263_800_868_1).abs() < 1e-8);
        assert!((t.gd - 0.001_111_102_952_968_4).abs() < 1e-8);
        let f = true_gap(&mix, z, Measure::Fgt(2.0)).unwrap();
        assert_eq!(f.gd, 0.0);
    }

    #[test]
    fn config_round_trip() {
        let text = "K = 3\np = 0.5, 0.3, 0.2\ncomponents = lognormal(0,1); lognormal(0.3, 1); lognormal(0.6,0.8)\n\
                    Z = quantile(0.4)  # mixture percentile\nmeasure = sen\nn = 2000\nreps = 2000\nseed = 42\n";
        let c: ExperimentConfig = text.parse().unwrap();
        assert_eq!(c.measure, Measure::Sen);
        assert_eq!(c.line, LineSpec::Quantile(0.4));
        assert_eq!(c.level, 0.95);
        let again: ExperimentConfig = c.to_string().parse().unwrap();
        assert_eq!(again, c);
        assert!("p = 0.5, 0.5\n".parse::<ExperimentConfig>().is_err());
        assert!("K = 2\np = 1\ncomponents = uniform(0,1)\nZ = 1\nmeasure = sen\nn=1\nreps=1"
            .parse::<ExperimentConfig>()
            .is_err());
    }
}
