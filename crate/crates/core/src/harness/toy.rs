//! Angular disagreement of saliency maps over a 2-D input grid.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::compare::{curve_pairs, ensembles_for, member_sets};
use super::config::ExperimentConfig;
use super::store::CurveStore;
use super::tags;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::explain::Predictor;
use crate::metrics::mean_pairwise_angle;
use crate::training::UnderspecSet;

/// Mean pairwise angle at each grid point; `None` where no pair of
/// gradients has a defined angle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToySeries {
    pub label: String,
    pub models: usize,
    pub cells: Vec<(f64, f64, Option<f64>)>,
}

impl ToySeries {
    /// Mean over cells with a defined angle.
    pub fn grid_mean(&self) -> f64 {
        let defined: Vec<f64> = self.cells.iter().filter_map(|c| c.2).collect();
        defined.iter().sum::<f64>() / defined.len().max(1) as f64
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::from("x,y,mean_angle\n");
        for &(x, y, a) in &self.cells {
            if let Some(a) = a {
                writeln!(text, "{x},{y},{a}").expect("write to string");
            }
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyReport {
    /// Individual members first, then one series per configured strategy.
    pub series: Vec<ToySeries>,
}

impl ToyReport {
    pub fn get(&self, label: &str) -> Option<&ToySeries> {
        self.series.iter().find(|s| s.label == label)
    }

    /// One `toy_<label>.csv` per series.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        self.series
            .iter()
            .map(|s| {
                let path = dir.join(format!("toy_{}.csv", s.label));
                s.write(&path)?;
                Ok(path)
            })
            .collect()
    }
}

/// `grid x grid` points spanning the per-axis data range, x varying fastest.
pub fn grid_points(data: &Dataset, grid: usize) -> Result<Vec<[f64; 2]>> {
    if data.dim() != 2 {
        return Err(Error::Config(format!("the toy grid needs 2-D inputs, dataset has {}", data.dim())));
    }
    let b = data.bounds();
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        (0..grid).map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64).collect()
    };
    let (xs, ys) = (axis(b[0]), axis(b[1]));
    Ok(ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect())
}

fn series(label: String, predictors: &[Predictor], points: &[[f64; 2]]) -> Result<ToySeries> {
    let cells = points
        .par_iter()
        .map(|p| {
            let grads: Vec<Vec<f64>> = predictors
                .iter()
                .map(|q| q.mean_input_gradient(p))
                .collect::<Result<_>>()?;
            Ok((p[0], p[1], mean_pairwise_angle(&grads)?))
        })
        .collect::<Result<_>>()?;
    Ok(ToySeries {
        label,
        models: predictors.len(),
        cells,
    })
}

pub fn run_toy(
    config: &ExperimentConfig,
    data: &Dataset,
    set: &UnderspecSet,
    curves: &mut CurveStore,
) -> Result<ToyReport> {
    let points = grid_points(data, config.toy.grid)?;
    let size = config.toy.ensemble_size;
    let count = config.toy.n_ensembles.unwrap_or(set.len() / size);
    if count < 2 {
        return Err(Error::Sampling(format!(
            "need at least 2 ensembles of {size} for pairwise angles, the set allows {count}"
        )));
    }
    let singles: Vec<Predictor> = set
        .members
        .iter()
        .map(|m| Predictor::single(m.model.clone()))
        .collect::<Result<_>>()?;
    let mut report = ToyReport {
        series: vec![series("single".into(), &singles, &points)?],
    };
    let groups = member_sets(set, size, count, config.master_seed)?;
    for &strategy in &config.toy.strategies {
        if strategy.needs_curves() {
            if size % 2 == 1 {
                log::info!("skipping {strategy} in the toy grid: ensemble size {size} is odd");
                continue;
            }
            curves.ensure(&curve_pairs(set, &groups), set, data)?;
        }
        let predictors = ensembles_for(config, set, curves, strategy, &groups, tags::TOY)?;
        report.series.push(series(strategy.as_str().into(), &predictors, &points)?);
    }
    Ok(report)
}
