//! Agreement between explanations: top-k sign agreement (SA), signed-set
//! agreement (SSA), consistent direction of contribution (CDC) and angular
//! difference, plus aggregation over all pairs of ensembles.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::Explanation;

/// Sign of an attribution value; exact zeros (of either sign) map to 0.
pub fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// The `k` largest-magnitude features with their signs.
///
/// Entries are ordered by descending `|value|`, ties by ascending index. `k`
/// larger than the vector length keeps every feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopKSet {
    pub k: usize,
    pub entries: Vec<(usize, i8)>,
}

impl TopKSet {
    /// Number of features actually kept, `min(k, d)`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn sign_of(&self, feature: usize) -> Option<i8> {
        self.entries.iter().find(|(f, _)| *f == feature).map(|&(_, s)| s)
    }
}

pub fn top_k(values: &[f64], k: usize) -> Result<TopKSet> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Stable sort keeps ascending index order among equal magnitudes.
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    order.truncate(k.min(values.len()));
    Ok(TopKSet {
        k,
        entries: order.into_iter().map(|i| (i, sign(values[i]))).collect(),
    })
}

fn check_pair(a: &TopKSet, b: &TopKSet) -> Result<()> {
    if a.k != b.k || a.len() != b.len() {
        return Err(Error::Metric(format!(
            "top-k sets differ in size: k={} ({} kept) vs k={} ({} kept)",
            a.k,
            a.len(),
            b.k,
            b.len()
        )));
    }
    Ok(())
}

fn matching(a: &TopKSet, b: &TopKSet) -> usize {
    a.entries.iter().filter(|&&(f, s)| b.sign_of(f) == Some(s)).count()
}

/// Fraction of kept features present in both sets with the same sign.
///
/// The denominator is the number of kept features, so values lie in
/// `{0, 1/k', ..., 1}` with `k' = min(k, d)`.
pub fn sa(a: &TopKSet, b: &TopKSet) -> Result<f64> {
    check_pair(a, b)?;
    if a.is_empty() {
        return Ok(1.0);
    }
    Ok(matching(a, b) as f64 / a.len() as f64)
}

/// 1 when both sets hold the same features with the same signs, in any order.
pub fn ssa(a: &TopKSet, b: &TopKSet) -> Result<f64> {
    check_pair(a, b)?;
    Ok(if matching(a, b) == a.len() { 1.0 } else { 0.0 })
}

/// 1 when every feature present in both sets carries the same sign in each.
pub fn cdc(a: &TopKSet, b: &TopKSet) -> Result<f64> {
    check_pair(a, b)?;
    let consistent = a
        .entries
        .iter()
        .all(|&(f, s)| b.sign_of(f).is_none_or(|t| t == s));
    Ok(if consistent { 1.0 } else { 0.0 })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Angle between two attribution vectors, in `[0, pi]`.
///
/// Uses `2 atan2(|u - v|, |u + v|)` on the normalized vectors, which stays
/// accurate near 0 and pi where `acos` of the cosine does not.
pub fn angular_diff(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Metric(format!("vector lengths differ: {} vs {}", a.len(), b.len())));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

/// Mean angle over all pairs of vectors, skipping pairs where the angle is
/// undefined. Returns `None` when no pair is defined.
pub fn mean_pairwise_angle(vectors: &[Vec<f64>]) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut used = 0usize;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            match angular_diff(&vectors[i], &vectors[j]) {
                Ok(a) => {
                    total += a;
                    used += 1;
                }
                Err(Error::UndefinedAngle) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok((used > 0).then(|| total / used as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Sa,
    Ssa,
    Cdc,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Sa, Metric::Ssa, Metric::Cdc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Sa => "sa",
            Metric::Ssa => "ssa",
            Metric::Cdc => "cdc",
        }
    }

    pub fn score(&self, a: &TopKSet, b: &TopKSet) -> Result<f64> {
        match self {
            Metric::Sa => sa(a, b),
            Metric::Ssa => ssa(a, b),
            Metric::Cdc => cdc(a, b),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

/// A fixed `k`, or every feature (`"d"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "KSpec", into = "KSpec")]
pub enum TopK {
    Count(usize),
    All,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KSpec {
    Count(usize),
    Name(String),
}

impl TryFrom<KSpec> for TopK {
    type Error = Error;

    fn try_from(raw: KSpec) -> Result<Self> {
        match raw {
            KSpec::Count(0) => Err(Error::InvalidK),
            KSpec::Count(k) => Ok(TopK::Count(k)),
            KSpec::Name(s) => s.parse(),
        }
    }
}

impl From<TopK> for KSpec {
    fn from(k: TopK) -> Self {
        match k {
            TopK::Count(k) => KSpec::Count(k),
            TopK::All => KSpec::Name("d".into()),
        }
    }
}

impl TopK {
    pub fn resolve(&self, d: usize) -> usize {
        match self {
            TopK::Count(k) => *k,
            TopK::All => d,
        }
    }
}

impl fmt::Display for TopK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopK::Count(k) => write!(f, "{k}"),
            TopK::All => f.write_str("d"),
        }
    }
}

impl FromStr for TopK {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "d" {
            return Ok(TopK::All);
        }
        match s.parse::<usize>() {
            Ok(0) => Err(Error::InvalidK),
            Ok(k) => Ok(TopK::Count(k)),
            Err(_) => Err(Error::Config(format!("k must be a positive integer or `d`, got `{s}`"))),
        }
    }
}

/// Linear-interpolation quantile of an ascending slice (`q` in `[0, 1]`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty slice");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub median: f64,
    pub p5: f64,
    pub p95: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            median: quantile(&sorted, 0.5),
            p5: quantile(&sorted, 0.05),
            p95: quantile(&sorted, 0.95),
            mean,
            std: var.sqrt(),
        }
    }
}

/// Pairwise agreement between `E` ensembles over a common list of inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSummary {
    pub input_ids: Vec<usize>,
    /// Mean over all ensemble pairs, one entry per input.
    pub per_input: Vec<f64>,
    /// Mean over inputs, one entry per pair `(i, j)`, `i < j`, in lexicographic order.
    pub per_pair: Vec<f64>,
    /// Statistics of `per_input`.
    pub inputs: Distribution,
    /// Statistics of `per_pair`.
    pub pairs: Distribution,
}

impl PairwiseSummary {
    pub fn pair_count(&self) -> usize {
        self.per_pair.len()
    }
}

/// `tables[e][i]` is ensemble `e`'s explanation of the `i`-th input; every
/// table must list the same inputs in the same order.
pub fn pairwise_stats(tables: &[Vec<Explanation>], metric: Metric, k: TopK) -> Result<PairwiseSummary> {
    if tables.len() < 2 {
        return Err(Error::InsufficientSet {
            needed: 2,
            available: tables.len(),
        });
    }
    let first = &tables[0];
    if first.is_empty() {
        return Err(Error::Alignment("explanation tables are empty".into()));
    }
    let input_ids: Vec<usize> = first.iter().map(|e| e.input_id).collect();
    for (e, table) in tables.iter().enumerate().skip(1) {
        if table.len() != first.len() || table.iter().zip(&input_ids).any(|(x, &id)| x.input_id != id) {
            return Err(Error::Alignment(format!("table {e} does not match the input ids of table 0")));
        }
    }
    let d = first[0].values.len();
    let k = k.resolve(d);
    let sets: Vec<Vec<TopKSet>> = tables
        .iter()
        .map(|t| t.iter().map(|e| top_k(&e.values, k)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..tables.len())
        .flat_map(|i| (i + 1..tables.len()).map(move |j| (i, j)))
        .collect();
    // scores[input][pair], each row summed in fixed pair order.
    let scores: Vec<Vec<f64>> = (0..input_ids.len())
        .into_par_iter()
        .map(|x| {
            pairs
                .iter()
                .map(|&(i, j)| metric.score(&sets[i][x], &sets[j][x]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let per_input: Vec<f64> = scores
        .iter()
        .map(|row| row.iter().sum::<f64>() / pairs.len() as f64)
        .collect();
    let per_pair: Vec<f64> = (0..pairs.len())
        .map(|p| scores.iter().map(|row| row[p]).sum::<f64>() / input_ids.len() as f64)
        .collect();
    Ok(PairwiseSummary {
        input_ids,
        inputs: Distribution::of(&per_input),
        pairs: Distribution::of(&per_pair),
        per_input,
        per_pair,
    })
}
