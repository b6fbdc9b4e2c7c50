//! Two interleaving half circles.
//!
//! Class 0 is the upper unit half circle centered at the origin. Class 1 is the
//! same half circle reflected through the origin and shifted by `(1, 0.5)`,
//! i.e. points `(1 - cos t, 0.5 - sin t)`. Angles are evenly spaced over
//! `[0, pi]`, and each coordinate then receives `N(0, noise^2)` jitter.

use std::f64::consts::PI;

use super::{preprocess, FeatureConfig, FeatureKind, MissingPolicy, RawColumn, RawTable, SchemaConfig};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoMoonsPoints {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<u8>,
}

fn linspace(n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { PI / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| i as f64 * step)
}

/// Raw (unstandardized) two-moons points: `n / 2` of class 0 followed by the rest of class 1.
pub fn two_moons_raw(n: usize, noise: f64, rng: &mut SeededRng) -> Result<TwoMoonsPoints> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("two moons needs n >= 2, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidSize(format!("noise must be finite and >= 0, got {noise}")));
    }
    let n_upper = n / 2;
    let n_lower = n - n_upper;
    let mut points: Vec<[f64; 2]> = linspace(n_upper)
        .map(|t| [t.cos(), t.sin()])
        .chain(linspace(n_lower).map(|t| [1.0 - t.cos(), 0.5 - t.sin()]))
        .collect();
    let labels = (0..n).map(|i| u8::from(i >= n_upper)).collect();
    for p in points.iter_mut() {
        p[0] += noise * rng.gaussian();
        p[1] += noise * rng.gaussian();
    }
    Ok(TwoMoonsPoints { points, labels })
}

pub(crate) fn moons_schema() -> SchemaConfig {
    SchemaConfig {
        features: ["x1", "x2"]
            .iter()
            .map(|name| FeatureConfig {
                name: name.to_string(),
                kind: FeatureKind::Continuous,
                categories: None,
            })
            .collect(),
        label_column: "label".into(),
        positive_values: vec!["1".into()],
        missing_policy: MissingPolicy::Reject,
        missing_tokens: Vec::new(),
        train_fraction: 0.8,
        balance_classes: false,
    }
}

/// Standardized two-moons dataset with an 80/20 split.
///
/// Noise is drawn first; the split seed is the next word of the same stream.
pub fn two_moons(n: usize, noise: f64, rng: &mut SeededRng) -> Result<super::Dataset> {
    let TwoMoonsPoints { points, labels } = two_moons_raw(n, noise, rng)?;
    let raw = RawTable {
        names: vec!["x1".into(), "x2".into()],
        columns: vec![
            RawColumn::Continuous(points.iter().map(|p| Some(p[0])).collect()),
            RawColumn::Continuous(points.iter().map(|p| Some(p[1])).collect()),
        ],
        labels: labels.iter().map(|y| y.to_string()).collect(),
    };
    let split_seed = rng.next_u64();
    preprocess(&raw, &moons_schema(), split_seed)
}
