//! Survey ingestion and empirical distributions.
//!
//! Two input layouts are accepted: a single CSV with header
//! `income,eq_adults,group`, and a legacy triple of whitespace-separated files
//! (incomes, equivalent-adult factors, integer stratum labels). Incomes are
//! divided by their equivalent-adult factor at load; nothing downstream sees
//! household sizes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::distribution::IncomeDistribution;
use crate::error::{Error, Result};

/// Largest stratum label accepted by the legacy triple format.
pub const LEGACY_MAX_LABEL: i64 = 15;

/// One household as read from disk, before per-capita scaling.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct HouseholdRecord {
    pub income: f64,
    #[serde(rename = "eq_adults")]
    pub equiv_adults: f64,
    #[serde(rename = "group")]
    pub group_label: i64,
}

impl HouseholdRecord {
    fn validate(&self, record: usize) -> Result<()> {
        if !(self.income.is_finite() && self.income >= 0.0) {
            return Err(Error::InvalidRecord {
                record,
                reason: format!("income {} must be finite and nonnegative", self.income),
            });
        }
        if !(self.equiv_adults.is_finite() && self.equiv_adults > 0.0) {
            return Err(Error::InvalidRecord {
                record,
                reason: format!(
                    "equivalent-adult factor {} must be positive",
                    self.equiv_adults
                ),
            });
        }
        Ok(())
    }

    pub fn per_capita(&self) -> f64 {
        self.income / self.equiv_adults
    }
}

/// Sorted sample with its right-continuous step CDF and left-continuous quantile.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDist {
    sorted: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("empirical distribution of an empty sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("sample contains a non-finite value".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of values `<= x`.
    pub fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|&v| v <= x)
    }

    pub fn empirical_cdf(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.len() as f64
    }

    /// `inf{x : cdf(x) >= t}`, i.e. the `⌈t·n⌉`-th order statistic.
    pub fn empirical_quantile(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Domain(format!("quantile level {t} outside (0, 1]")));
        }
        Ok(self.sorted[self.quantile_rank(t) - 1])
    }

    /// 1-based rank `k` with `(k-1)/n < t <= k/n`, computed against the same
    /// `count/n` divisions `empirical_cdf` uses so the two stay a Galois pair.
    fn quantile_rank(&self, t: f64) -> usize {
        let n = self.len();
        let nf = n as f64;
        let mut k = ((t * nf).ceil() as usize).clamp(1, n);
        while k > 1 && (k - 1) as f64 / nf >= t {
            k -= 1;
        }
        while k < n && (k as f64) / nf < t {
            k += 1;
        }
        k
    }
}

impl IncomeDistribution for EmpiricalDist {
    fn cdf(&self, x: f64) -> f64 {
        self.empirical_cdf(x)
    }

    fn quantile(&self, t: f64) -> f64 {
        let t = t.clamp(f64::MIN_POSITIVE, 1.0);
        self.sorted[self.quantile_rank(t) - 1]
    }

    fn atoms(&self) -> Option<&[f64]> {
        Some(&self.sorted)
    }
}

/// Per-capita incomes partitioned into `K` strata.
///
/// Strata are indexed `0..K` internally; `labels()[i]` is the original label of
/// stratum `i`, and strata are ordered by ascending original label.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    incomes: Vec<f64>,
    group_of: Vec<usize>,
    labels: Vec<i64>,
    counts: Vec<usize>,
}

impl GroupedSample {
    /// Builds a sample from per-capita incomes and arbitrary integer labels,
    /// relabeling strata to contiguous indices in ascending label order.
    pub fn from_labels(incomes: Vec<f64>, labels: &[i64]) -> Result<Self> {
        if incomes.len() != labels.len() {
            return Err(Error::Format(format!(
                "{} incomes but {} labels",
                incomes.len(),
                labels.len()
            )));
        }
        let mut index: BTreeMap<i64, usize> = BTreeMap::new();
        for &l in labels {
            index.insert(l, 0);
        }
        for (i, v) in index.values_mut().enumerate() {
            *v = i;
        }
        let group_of = labels.iter().map(|l| index[l]).collect();
        let distinct = index.keys().copied().collect();
        Self::from_indices(incomes, group_of, distinct)
    }

    /// Builds a sample from stratum indices in `0..labels.len()`.
    /// Fails if any stratum ends up empty.
    pub fn from_indices(incomes: Vec<f64>, group_of: Vec<usize>, labels: Vec<i64>) -> Result<Self> {
        if incomes.is_empty() {
            return Err(Error::Format("sample has no records".into()));
        }
        if incomes.len() != group_of.len() {
            return Err(Error::Format("incomes and stratum indices differ in length".into()));
        }
        for (i, &y) in incomes.iter().enumerate() {
            if !(y.is_finite() && y >= 0.0) {
                return Err(Error::InvalidRecord {
                    record: i + 1,
                    reason: format!("per-capita income {y} must be finite and nonnegative"),
                });
            }
        }
        let k = labels.len();
        let mut counts = vec![0usize; k];
        for &g in &group_of {
            if g >= k {
                return Err(Error::Format(format!("stratum index {g} out of range 0..{k}")));
            }
            counts[g] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyStratum(empty + 1));
        }
        Ok(Self {
            incomes,
            group_of,
            labels,
            counts,
        })
    }

    pub fn from_records(records: &[HouseholdRecord]) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            r.validate(i + 1)?;
        }
        let incomes = records.iter().map(HouseholdRecord::per_capita).collect();
        let labels: Vec<i64> = records.iter().map(|r| r.group_label).collect();
        Self::from_labels(incomes, &labels)
    }

    pub fn len(&self) -> usize {
        self.incomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incomes.is_empty()
    }

    pub fn num_groups(&self) -> usize {
        self.labels.len()
    }

    pub fn per_capita_incomes(&self) -> &[f64] {
        &self.incomes
    }

    /// Stratum index (`0..K`) of each income.
    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// `n_i / n` per stratum.
    pub fn shares(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn group_values(&self, group: usize) -> Vec<f64> {
        self.incomes
            .iter()
            .zip(&self.group_of)
            .filter(|(_, &g)| g == group)
            .map(|(&y, _)| y)
            .collect()
    }

    pub fn group_distribution(&self, group: usize) -> EmpiricalDist {
        EmpiricalDist::new(self.group_values(group)).expect("strata are nonempty by construction")
    }

    pub fn group_distributions(&self) -> Vec<EmpiricalDist> {
        (0..self.num_groups()).map(|i| self.group_distribution(i)).collect()
    }

    /// Distribution of all incomes regardless of stratum.
    pub fn pooled_distribution(&self) -> EmpiricalDist {
        EmpiricalDist::new(self.incomes.clone()).expect("sample is nonempty by construction")
    }

    /// Same incomes with stratum indices permuted: stratum `i` becomes `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let k = self.num_groups();
        if perm.len() != k {
            return Err(Error::Parameter("permutation length must equal K".into()));
        }
        let mut labels = vec![0i64; k];
        for (i, &p) in perm.iter().enumerate() {
            labels[p] = self.labels[i];
        }
        let group_of = self.group_of.iter().map(|&g| perm[g]).collect();
        Self::from_indices(self.incomes.clone(), group_of, labels)
    }
}

/// Input layouts understood by [`load_survey`].
#[derive(Debug, Clone, Copy)]
pub enum SurveySource<'a> {
    Csv(&'a Path),
    Legacy {
        income: &'a Path,
        eq_adults: &'a Path,
        labels: &'a Path,
    },
}

pub fn load_survey(source: SurveySource<'_>) -> Result<GroupedSample> {
    match source {
        SurveySource::Csv(path) => read_csv(open(path)?),
        SurveySource::Legacy {
            income,
            eq_adults,
            labels,
        } => read_legacy(open(income)?, open(eq_adults)?, open(labels)?),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

const CSV_COLUMNS: [&str; 3] = ["income", "eq_adults", "group"];

pub fn read_csv<R: Read>(reader: R) -> Result<GroupedSample> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("cannot read CSV header: {e}")))?
        .clone();
    for col in CSV_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Format(format!(
                "CSV header lacks column `{col}` (expected income,eq_adults,group)"
            )));
        }
    }
    if let Some(extra) = headers.iter().find(|h| !CSV_COLUMNS.contains(h)) {
        return Err(Error::Format(format!("unknown CSV column `{extra}`")));
    }
    let mut records = Vec::new();
    for (i, row) in rdr.deserialize::<HouseholdRecord>().enumerate() {
        let rec = row.map_err(|e| Error::InvalidRecord {
            record: i + 1,
            reason: e.to_string(),
        })?;
        records.push(rec);
    }
    GroupedSample::from_records(&records)
}

fn read_numbers<R: Read>(mut reader: R, what: &str) -> Result<Vec<f64>> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::Format(format!("{what} file: {e}")))?;
    text.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<f64>().map_err(|_| Error::InvalidRecord {
                record: i + 1,
                reason: format!("{what} value `{tok}` is not a number"),
            })
        })
        .collect()
}

/// Reads the legacy triple: incomes, equivalent-adult factors and labels in `1..=15`.
pub fn read_legacy<A: Read, B: Read, C: Read>(income: A, eq_adults: B, labels: C) -> Result<GroupedSample> {
    let inc = read_numbers(income, "income")?;
    let eq = read_numbers(eq_adults, "equivalent-adult")?;
    let lab = read_numbers(labels, "label")?;
    if inc.len() != eq.len() || inc.len() != lab.len() {
        return Err(Error::Format(format!(
            "legacy files differ in length: {} incomes, {} factors, {} labels",
            inc.len(),
            eq.len(),
            lab.len()
        )));
    }
    let mut records = Vec::with_capacity(inc.len());
    for (i, ((&income, &equiv_adults), &l)) in inc.iter().zip(&eq).zip(&lab).enumerate() {
        if l.fract() != 0.0 || !(1.0..=LEGACY_MAX_LABEL as f64).contains(&l) {
            return Err(Error::InvalidRecord {
                record: i + 1,
                reason: format!("label {l} must be an integer in 1..={LEGACY_MAX_LABEL}"),
            });
        }
        records.push(HouseholdRecord {
            income,
            equiv_adults,
            group_label: l as i64,
        });
    }
    GroupedSample::from_records(&records)
}

/// Writes per-capita incomes as CSV with unit equivalence scale.
/// Floats use shortest round-trip formatting, so reading back is lossless.
pub fn write_csv<W: Write>(sample: &GroupedSample, mut out: W) -> std::io::Result<()> {
    writeln!(out, "income,eq_adults,group")?;
    for (&y, &g) in sample.incomes.iter().zip(&sample.group_of) {
        writeln!(out, "{y},1,{}", sample.labels[g])?;
    }
    Ok(())
}

pub fn write_legacy<A: Write, B: Write, C: Write>(
    sample: &GroupedSample,
    mut income: A,
    mut eq_adults: B,
    mut labels: C,
) -> std::io::Result<()> {
    for (&y, &g) in sample.incomes.iter().zip(&sample.group_of) {
        writeln!(income, "{y}")?;
        writeln!(eq_adults, "1")?;
        writeln!(labels, "{}", sample.labels[g])?;
    }
    Ok(())
}
