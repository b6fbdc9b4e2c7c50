//! Tabular datasets: ingestion, encoding, standardization and splitting.
//!
//! Rows are shuffled once with the split seed and the leading
//! `train_fraction` of the permutation becomes the training partition.
//! Everything that is estimated from data (imputation medians,
//! standardization statistics, category levels) comes from the training rows
//! only and is then applied to every row.

mod table;
mod moons;

pub use table::{load_csv, RawColumn, RawTable};
pub use moons::{two_moons, two_moons_raw, TwoMoonsPoints};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Batch;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub name: String,
    pub kind: FeatureKind,
    /// Fixed level list for a categorical feature; discovered from the
    /// training rows (sorted) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    /// Continuous gaps take the training median; categorical gaps encode as
    /// an all-zero block.
    #[default]
    Median,
    /// Any missing cell is an error.
    Reject,
}

fn default_missing_tokens() -> Vec<String> {
    ["", "?", "NA", "NaN"].iter().map(|s| s.to_string()).collect()
}

fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub features: Vec<FeatureConfig>,
    pub label_column: String,
    /// Raw label strings mapped to `y = 1`; everything else becomes `y = 0`.
    pub positive_values: Vec<String>,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
    #[serde(default = "default_missing_tokens")]
    pub missing_tokens: Vec<String>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Subsample the majority class down to the minority count before splitting.
    #[serde(default)]
    pub balance_classes: bool,
}

/// One encoded input feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncodedFeature {
    Continuous { name: String, mean: f64, std: f64 },
    Categorical { name: String, categories: Vec<String> },
}

impl EncodedFeature {
    pub fn name(&self) -> &str {
        match self {
            EncodedFeature::Continuous { name, .. } | EncodedFeature::Categorical { name, .. } => name,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            EncodedFeature::Continuous { .. } => 1,
            EncodedFeature::Categorical { categories, .. } => categories.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<EncodedFeature>,
    pub label_column: String,
    pub positive_values: Vec<String>,
}

impl FeatureSchema {
    /// Encoded width: continuous count plus all categorical levels.
    pub fn dim(&self) -> usize {
        self.features.iter().map(EncodedFeature::width).sum()
    }

    /// Human-readable name of every encoded column.
    pub fn column_names(&self) -> Vec<String> {
        self.features
            .iter()
            .flat_map(|f| match f {
                EncodedFeature::Continuous { name, .. } => vec![name.clone()],
                EncodedFeature::Categorical { name, categories } => {
                    categories.iter().map(|c| format!("{name}={c}")).collect()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Test,
}

/// Encoded, standardized data with its train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    dim: usize,
    schema: FeatureSchema,
    split: Split,
}

impl Dataset {
    /// Wrap already-encoded rows. Every row index must appear in exactly one partition.
    pub fn from_encoded(
        features: Vec<f64>,
        labels: Vec<u8>,
        dim: usize,
        schema: FeatureSchema,
        split: Split,
    ) -> Result<Self> {
        let n = labels.len();
        if dim == 0 || features.len() != n * dim {
            return Err(Error::Shape {
                context: "encoded features",
                expected: n * dim,
                got: features.len(),
            });
        }
        if schema.dim() != dim {
            return Err(Error::Validation(format!(
                "schema describes {} columns but rows have {dim}",
                schema.dim()
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Validation("labels must be 0 or 1".into()));
        }
        let mut seen = vec![false; n];
        for &i in split.train.iter().chain(&split.test) {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Validation(format!("row {i} is out of range or split twice")));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Validation("split does not cover every row".into()));
        }
        Ok(Self {
            features,
            labels,
            dim,
            schema,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn partition(&self, part: Part) -> Partition<'_> {
        let indices = match part {
            Part::Train => &self.split.train,
            Part::Test => &self.split.test,
        };
        Partition { data: self, indices }
    }

    pub fn train(&self) -> Partition<'_> {
        self.partition(Part::Train)
    }

    pub fn test(&self) -> Partition<'_> {
        self.partition(Part::Test)
    }

    /// Per-column `(min, max)` over all rows.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|c| {
                (0..self.len()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    let v = self.features[r * self.dim + c];
                    (lo.min(v), hi.max(v))
                })
            })
            .collect()
    }
}

/// A view of the rows of one partition, in split order.
#[derive(Debug, Clone, Copy)]
pub struct Partition<'a> {
    data: &'a Dataset,
    indices: &'a [usize],
}

impl<'a> Partition<'a> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.dim
    }

    pub fn indices(&self) -> &'a [usize] {
        self.indices
    }

    /// `(row index, features, label)` in split order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &'a [f64], u8)> + 'a {
        let data = self.data;
        self.indices.iter().map(move |&i| (i, data.row(i), data.label(i)))
    }

    /// Contiguous copies of the rows in `range` (positions within the partition).
    pub fn gather(&self, range: std::ops::Range<usize>) -> (Vec<f64>, Vec<u8>) {
        let idx = &self.indices[range];
        let mut x = Vec::with_capacity(idx.len() * self.data.dim);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            x.extend_from_slice(self.data.row(i));
            y.push(self.data.label(i));
        }
        (x, y)
    }

    /// Consecutive mini-batches in split order; the last one may be smaller.
    pub fn batches(&self, batch_size: usize) -> Vec<(Vec<f64>, Vec<u8>)> {
        (0..self.len())
            .step_by(batch_size.max(1))
            .map(|start| self.gather(start..(start + batch_size).min(self.len())))
            .collect()
    }

    /// Mean cross-entropy of `model` over the whole partition.
    pub fn loss(&self, model: &crate::nn::Mlp) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyPartition);
        }
        let (x, y) = self.gather(0..self.len());
        model.loss(&Batch::new(&x, &y, self.dim())?)
    }
}

/// Size of the training partition for `n` rows.
fn train_len(n: usize, fraction: f64) -> usize {
    let raw = (n as f64 * fraction).round() as usize;
    raw.clamp(1, n.saturating_sub(1).max(1))
}

/// Linear-interpolation median of a non-empty slice.
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Encode, impute, standardize and split a raw table.
pub fn preprocess(raw: &RawTable, schema: &SchemaConfig, split_seed: u64) -> Result<Dataset> {
    if raw.is_empty() {
        return Err(Error::InvalidSize("table has no rows".into()));
    }
    if !(schema.train_fraction > 0.0 && schema.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie in (0, 1), got {}",
            schema.train_fraction
        )));
    }
    if raw.columns.len() != schema.features.len() {
        return Err(Error::Schema(format!(
            "table has {} feature columns, schema declares {}",
            raw.columns.len(),
            schema.features.len()
        )));
    }

    let mut labels: Vec<u8> = raw
        .labels
        .iter()
        .map(|v| u8::from(schema.positive_values.iter().any(|p| p == v)))
        .collect();

    let mut rows: Vec<usize> = (0..raw.len()).collect();
    if schema.balance_classes {
        rows = balanced_rows(&labels, split_seed)?;
    }
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidSize(format!("need at least 2 rows, have {n}")));
    }

    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(split_seed).shuffle(&mut order);
    let n_train = train_len(n, schema.train_fraction);
    let split = Split {
        train: order[..n_train].to_vec(),
        test: order[n_train..].to_vec(),
    };

    let mut encoded_features = Vec::with_capacity(schema.features.len());
    // Column-major encoded blocks, one per feature.
    let mut blocks: Vec<Vec<f64>> = Vec::with_capacity(schema.features.len());
    for (config, column) in schema.features.iter().zip(&raw.columns) {
        match (config.kind, column) {
            (FeatureKind::Continuous, RawColumn::Continuous(values)) => {
                let values: Vec<Option<f64>> = rows.iter().map(|&r| values[r]).collect();
                let (feature, block) = encode_continuous(&config.name, &values, &split, schema.missing_policy)?;
                encoded_features.push(feature);
                blocks.push(block);
            }
            (FeatureKind::Categorical, RawColumn::Categorical(values)) => {
                let values: Vec<Option<&str>> = rows.iter().map(|&r| values[r].as_deref()).collect();
                let (feature, block) = encode_categorical(config, &values, &split, schema.missing_policy)?;
                encoded_features.push(feature);
                blocks.push(block);
            }
            _ => {
                return Err(Error::Schema(format!(
                    "column `{}` does not match its declared kind",
                    config.name
                )))
            }
        }
    }

    let feature_schema = FeatureSchema {
        features: encoded_features,
        label_column: schema.label_column.clone(),
        positive_values: schema.positive_values.clone(),
    };
    let dim = feature_schema.dim();
    if dim == 0 {
        return Err(Error::Schema("no encoded feature columns".into()));
    }
    let mut features = vec![0.0; n * dim];
    let mut offset = 0;
    for (feature, block) in feature_schema.features.iter().zip(&blocks) {
        let width = feature.width();
        for r in 0..n {
            features[r * dim + offset..r * dim + offset + width]
                .copy_from_slice(&block[r * width..(r + 1) * width]);
        }
        offset += width;
    }
    labels = rows.iter().map(|&r| labels[r]).collect();
    Dataset::from_encoded(features, labels, dim, feature_schema, split)
}

fn balanced_rows(labels: &[u8], seed: u64) -> Result<Vec<usize>> {
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let keep = pos.len().min(neg.len());
    if keep == 0 {
        return Err(Error::InvalidSize("class balancing needs both classes".into()));
    }
    let mut rng = SeededRng::derive(seed, &[0xba1a]);
    rng.shuffle(&mut pos);
    rng.shuffle(&mut neg);
    let mut rows: Vec<usize> = pos[..keep].iter().chain(&neg[..keep]).copied().collect();
    rows.sort_unstable();
    Ok(rows)
}

fn encode_continuous(
    name: &str,
    values: &[Option<f64>],
    split: &Split,
    policy: MissingPolicy,
) -> Result<(EncodedFeature, Vec<f64>)> {
    let mut observed: Vec<f64> = split.train.iter().filter_map(|&r| values[r]).collect();
    let fill = if values.iter().any(Option::is_none) {
        if policy == MissingPolicy::Reject {
            let row = values.iter().position(Option::is_none).unwrap_or(0);
            return Err(Error::Parse {
                location: format!("row {row}, column `{name}`"),
                message: "missing value with missing_policy = reject".into(),
            });
        }
        if observed.is_empty() {
            return Err(Error::Validation(format!(
                "column `{name}` has no observed training values to impute from"
            )));
        }
        median(&mut observed)
    } else {
        0.0
    };
    let filled: Vec<f64> = values.iter().map(|v| v.unwrap_or(fill)).collect();

    let n_train = split.train.len();
    if n_train < 2 {
        return Err(Error::InvalidSize("standardization needs at least 2 training rows".into()));
    }
    let mean = split.train.iter().map(|&r| filled[r]).sum::<f64>() / n_train as f64;
    let var = split
        .train
        .iter()
        .map(|&r| (filled[r] - mean).powi(2))
        .sum::<f64>()
        / (n_train - 1) as f64;
    let std = var.sqrt();
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::ConstantColumn(name.to_string()));
    }
    let block = filled.iter().map(|v| (v - mean) / std).collect();
    Ok((
        EncodedFeature::Continuous {
            name: name.to_string(),
            mean,
            std,
        },
        block,
    ))
}

fn encode_categorical(
    config: &FeatureConfig,
    values: &[Option<&str>],
    split: &Split,
    policy: MissingPolicy,
) -> Result<(EncodedFeature, Vec<f64>)> {
    if policy == MissingPolicy::Reject {
        if let Some(row) = values.iter().position(Option::is_none) {
            return Err(Error::Parse {
                location: format!("row {row}, column `{}`", config.name),
                message: "missing value with missing_policy = reject".into(),
            });
        }
    }
    let categories: Vec<String> = match &config.categories {
        Some(c) => c.clone(),
        None => split
            .train
            .iter()
            .filter_map(|&r| values[r])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_string)
            .collect(),
    };
    if categories.is_empty() {
        return Err(Error::Schema(format!(
            "categorical column `{}` has no levels",
            config.name
        )));
    }
    let width = categories.len();
    let mut block = vec![0.0; values.len() * width];
    for (r, v) in values.iter().enumerate() {
        // Missing and unseen levels stay all-zero.
        if let Some(pos) = v.and_then(|v| categories.iter().position(|c| c == v)) {
            block[r * width + pos] = 1.0;
        }
    }
    Ok((
        EncodedFeature::Categorical {
            name: config.name.clone(),
            categories,
        },
        block,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (RawTable, SchemaConfig) {
        let colors = ["red", "green", "blue", "red", "green", "blue", "red", "green", "blue", "red"];
        let raw = RawTable {
            names: vec!["color".into(), "size".into()],
            columns: vec![
                RawColumn::Categorical(colors.iter().map(|c| Some(c.to_string())).collect()),
                RawColumn::Continuous((0..10).map(|i| Some(i as f64 * 1.5 + 2.0)).collect()),
            ],
            labels: (0..10).map(|i| if i % 2 == 0 { "good" } else { "bad" }.to_string()).collect(),
        };
        let schema = SchemaConfig {
            features: vec![
                FeatureConfig {
                    name: "color".into(),
                    kind: FeatureKind::Categorical,
                    categories: None,
                },
                FeatureConfig {
                    name: "size".into(),
                    kind: FeatureKind::Continuous,
                    categories: None,
                },
            ],
            label_column: "outcome".into(),
            positive_values: vec!["good".into()],
            missing_policy: MissingPolicy::Median,
            missing_tokens: default_missing_tokens(),
            train_fraction: 0.8,
            balance_classes: false,
        };
        (raw, schema)
    }

    #[test]
    fn fixture_dimensions_and_split_sizes() {
        let (raw, schema) = fixture();
        let data = preprocess(&raw, &schema, 3).unwrap();
        assert_eq!(data.dim(), 4);
        assert_eq!(data.train().len(), 8);
        assert_eq!(data.test().len(), 2);
    }

    #[test]
    fn train_columns_are_standardized() {
        let (raw, schema) = fixture();
        let data = preprocess(&raw, &schema, 3).unwrap();
        let col = 3;
        let vals: Vec<f64> = data.train().iter().map(|(_, x, _)| x[col]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
        assert!(mean.abs() < 1e-9);
        assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let (raw, schema) = fixture();
        let a = preprocess(&raw, &schema, 11).unwrap();
        let b = preprocess(&raw, &schema, 11).unwrap();
        assert_eq!(a.split(), b.split());
        let mut all: Vec<usize> = a.split().train.iter().chain(&a.split().test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn one_hot_blocks_have_single_one() {
        let (raw, schema) = fixture();
        let data = preprocess(&raw, &schema, 5).unwrap();
        for r in 0..data.len() {
            let s: f64 = data.row(r)[..3].iter().sum();
            assert_eq!(s, 1.0);
        }
        // Labels follow the positive-outcome mapping.
        assert_eq!(data.labels(), &[1, 0, 1, 0, 1, 0, 1, 0, 1, 0]);
    }

    #[test]
    fn unseen_test_category_encodes_as_zero_block() {
        let (mut raw, schema) = fixture();
        let data = preprocess(&raw, &schema, 5).unwrap();
        let test_row = data.split().test[0];
        if let RawColumn::Categorical(v) = &mut raw.columns[0] {
            v[test_row] = Some("purple".into());
        }
        let data = preprocess(&raw, &schema, 5).unwrap();
        assert_eq!(&data.row(test_row)[..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_column_is_rejected() {
        let (mut raw, schema) = fixture();
        raw.columns[1] = RawColumn::Continuous(vec![Some(4.0); 10]);
        assert!(matches!(preprocess(&raw, &schema, 1), Err(Error::ConstantColumn(_))));
    }

    #[test]
    fn missing_continuous_value_takes_train_median() {
        let (mut raw, schema) = fixture();
        let probe = preprocess(&raw, &schema, 2).unwrap();
        let test_row = probe.split().test[0];
        if let RawColumn::Continuous(v) = &mut raw.columns[1] {
            v[test_row] = None;
        }
        let data = preprocess(&raw, &schema, 2).unwrap();
        // Hand-computed: median over the eight training values of 2 + 1.5 i.
        let mut train_vals: Vec<f64> = data.split().train.iter().map(|&r| r as f64 * 1.5 + 2.0).collect();
        train_vals.sort_by(f64::total_cmp);
        let med = 0.5 * (train_vals[3] + train_vals[4]);
        let EncodedFeature::Continuous { mean, std, .. } = &data.schema().features[1] else {
            panic!("size should be continuous");
        };
        let restored = data.row(test_row)[3] * std + mean;
        assert!((restored - med).abs() < 1e-12);
    }

    #[test]
    fn balancing_equalizes_classes() {
        let (mut raw, mut schema) = fixture();
        raw.labels[1] = "good".into();
        raw.labels[3] = "good".into();
        schema.balance_classes = true;
        let data = preprocess(&raw, &schema, 2).unwrap();
        let pos = data.labels().iter().filter(|&&y| y == 1).count();
        assert_eq!(pos * 2, data.len());
    }
}
