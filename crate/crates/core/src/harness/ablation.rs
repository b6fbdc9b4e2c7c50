//! Perturbation ablation over (layer, target, sigma, m) grids.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::{eval_inputs, member_order, tags};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::explain::{attribute_all, Predictor, PredictorKind};
use crate::landscape::{perturb_model, PerturbSpec, PerturbTarget};
use crate::metrics::{pairwise_stats, quantile, Metric, TopK};
use crate::rng::derive_seed;
use crate::training::{accuracy, UnderspecSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub layer: usize,
    pub target: PerturbTarget,
    pub sigma: f64,
    pub m: usize,
    pub sa_median: f64,
    pub sa_p5: f64,
    pub sa_p95: f64,
    pub acc_q1: f64,
    pub acc_median: f64,
    pub acc_q3: f64,
}

/// For every grid point, perturb each of the sampled members, explain the
/// evaluation inputs with each perturbed model and score top-k SA over all
/// member pairs. Accuracy quartiles are over the individual noisy variants.
pub fn run_ablation(config: &ExperimentConfig, data: &Dataset, set: &UnderspecSet) -> Result<Vec<AblationRow>> {
    let ab = &config.ablation;
    if set.len() < ab.members {
        return Err(Error::InsufficientSet {
            needed: ab.members,
            available: set.len(),
        });
    }
    let order = member_order(set, config.master_seed);
    let members: Vec<_> = order[..ab.members].iter().map(|&i| &set.members[i].model).collect();
    let inputs = eval_inputs(data, config.eval_input_count);
    let mut rows = Vec::new();
    let mut point = 0u64;
    for &layer in &ab.layers {
        for &target in &ab.targets {
            for &sigma in &ab.sigmas {
                for &m in &ab.counts {
                    let perturbed: Vec<_> = members
                        .par_iter()
                        .enumerate()
                        .map(|(i, base)| {
                            let spec = PerturbSpec {
                                layer,
                                target,
                                sigma,
                                count: m,
                                seed: derive_seed(config.master_seed, &[tags::ABLATION, point, i as u64]),
                            };
                            perturb_model(base, &spec)
                        })
                        .collect::<Result<_>>()?;
                    let mut accs: Vec<f64> = perturbed
                        .par_iter()
                        .flat_map_iter(|p| p.variants.iter())
                        .map(|v| accuracy(v, data.test()))
                        .collect::<Result<_>>()?;
                    accs.sort_by(f64::total_cmp);
                    let tables = perturbed
                        .into_iter()
                        .enumerate()
                        .map(|(i, p)| {
                            let predictor = Predictor::new(PredictorKind::Perturbed, p.variants)?;
                            let seed = derive_seed(config.master_seed, &[tags::ABLATION, tags::EXPLAIN, point, i as u64]);
                            attribute_all(&predictor, &config.explain, &inputs, seed)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let sa = pairwise_stats(&tables, Metric::Sa, TopK::Count(ab.k))?;
                    rows.push(AblationRow {
                        layer,
                        target,
                        sigma,
                        m,
                        sa_median: sa.inputs.median,
                        sa_p5: sa.inputs.p5,
                        sa_p95: sa.inputs.p95,
                        acc_q1: quantile(&accs, 0.25),
                        acc_median: quantile(&accs, 0.5),
                        acc_q3: quantile(&accs, 0.75),
                    });
                    log::info!(
                        "ablation layer={layer} target={} sigma={sigma} m={m}: SA median {:.4}",
                        target.as_str(),
                        sa.inputs.median
                    );
                    point += 1;
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_ablation(rows: &[AblationRow], path: &Path) -> Result<()> {
    let mut text = String::from("layer,target,sigma,m,sa_median,sa_p5,sa_p95,acc_q1,acc_median,acc_q3\n");
    for r in rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{}",
            r.layer,
            r.target.as_str(),
            r.sigma,
            r.m,
            r.sa_median,
            r.sa_p5,
            r.sa_p95,
            r.acc_q1,
            r.acc_median,
            r.acc_q3
        )
        .expect("write to string");
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
