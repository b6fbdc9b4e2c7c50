//! Ensemble-strategy comparison over disjoint member sets.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::store::CurveStore;
use super::{eval_inputs, member_order, tags};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::explain::{
    attribute_all, compose_ensemble, write_attributions, ComposeParams, CurveSource, Explanation, Strategy,
};
use crate::metrics::{pairwise_stats, Distribution, Metric, TopK};
use crate::nn::Mlp;
use crate::rng::derive_seed;
use crate::training::{accuracy, UnderspecSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub strategy: Strategy,
    pub n: usize,
    pub metric: Metric,
    pub k: TopK,
    pub input_id: usize,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub n: usize,
    pub metric: Metric,
    pub k: TopK,
    pub inputs: Distribution,
    pub pairs: Distribution,
    pub pair_count: usize,
    pub input_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub strategy: Strategy,
    pub n: usize,
    pub ensemble: usize,
    pub constituents: usize,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub dataset: String,
    /// Mean test accuracy of the retained single models.
    pub single_model_accuracy: f64,
    pub scores: Vec<ScoreRow>,
    pub summary: Vec<SummaryRow>,
    pub accuracy: Vec<AccuracyRow>,
    #[serde(skip)]
    pub attributions: Vec<AttributionTable>,
}

/// Explanations of the evaluation inputs by one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionTable {
    pub strategy: Strategy,
    pub n: usize,
    pub ensemble: usize,
    pub explanations: Vec<Explanation>,
}

impl ComparisonReport {
    pub fn summary_for(&self, strategy: Strategy, n: usize, metric: Metric, k: TopK) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.strategy == strategy && r.n == n && r.metric == metric && r.k == k)
    }

    pub fn mean_accuracy(&self, strategy: Strategy, n: usize) -> Option<f64> {
        let accs: Vec<f64> = self
            .accuracy
            .iter()
            .filter(|r| r.strategy == strategy && r.n == n)
            .map(|r| r.test_accuracy)
            .collect();
        (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
    }

    /// Constituent count of the first ensemble for each (strategy, n).
    pub fn constituent_counts(&self) -> Vec<(Strategy, usize, usize)> {
        self.accuracy
            .iter()
            .filter(|r| r.ensemble == 0)
            .map(|r| (r.strategy, r.n, r.constituents))
            .collect()
    }

    /// `results.csv`, `summary.csv` and `accuracy.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut results = String::from("dataset,strategy,n_pretrained,metric,k,input_id,mean_score\n");
        for r in &self.scores {
            writeln!(
                results,
                "{},{},{},{},{},{},{}",
                self.dataset, r.strategy, r.n, r.metric, r.k, r.input_id, r.mean_score
            )
            .expect("write to string");
        }
        let mut summary = String::from(
            "dataset,strategy,n_pretrained,metric,k,median,p5,p95,mean,std,pair_median,pair_p5,pair_p95,pair_mean,pair_std,pairs,inputs\n",
        );
        for r in &self.summary {
            let (i, p) = (&r.inputs, &r.pairs);
            writeln!(
                summary,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.dataset,
                r.strategy,
                r.n,
                r.metric,
                r.k,
                i.median,
                i.p5,
                i.p95,
                i.mean,
                i.std,
                p.median,
                p.p5,
                p.p95,
                p.mean,
                p.std,
                r.pair_count,
                r.input_count
            )
            .expect("write to string");
        }
        let mut acc = String::from("dataset,strategy,n_pretrained,ensemble,constituents,test_accuracy\n");
        writeln!(acc, "{},single,1,-1,1,{}", self.dataset, self.single_model_accuracy).expect("write to string");
        for r in &self.accuracy {
            writeln!(
                acc,
                "{},{},{},{},{},{}",
                self.dataset, r.strategy, r.n, r.ensemble, r.constituents, r.test_accuracy
            )
            .expect("write to string");
        }
        let mut paths = Vec::new();
        for (name, text) in [("results.csv", results), ("summary.csv", summary), ("accuracy.csv", acc)] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            paths.push(path);
        }
        Ok(paths)
    }

    /// One `<strategy>_n<n>_e<ensemble>.csv` per ensemble under `dir`.
    pub fn write_attributions(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.attributions
            .iter()
            .map(|t| {
                let path = dir.join(format!("{}_n{}_e{}.csv", t.strategy, t.n, t.ensemble));
                write_attributions(&path, &t.explanations)?;
                Ok(path)
            })
            .collect()
    }
}

/// `E` disjoint member sets of size `n`, taken consecutively from the
/// master-seed permutation of the retained members.
pub fn member_sets(set: &UnderspecSet, n: usize, count: usize, master_seed: u64) -> Result<Vec<Vec<usize>>> {
    if n * count > set.len() {
        return Err(Error::Sampling(format!(
            "{count} disjoint sets of {n} need {} members, only {} retained",
            n * count,
            set.len()
        )));
    }
    let order = member_order(set, master_seed);
    Ok(order.chunks(n).take(count).map(|c| c.to_vec()).collect())
}

pub(crate) fn curve_pairs(set: &UnderspecSet, groups: &[Vec<usize>]) -> Vec<(u64, u64)> {
    groups
        .iter()
        .flat_map(|g| g.chunks_exact(2).map(|p| (set.members[p[0]].seed, set.members[p[1]].seed)))
        .collect()
}

fn strategy_index(s: Strategy) -> u64 {
    Strategy::ALL.iter().position(|&x| x == s).expect("listed strategy") as u64
}

/// One ensemble per member group. `stream` separates the random streams of different callers.
pub(crate) fn ensembles_for(
    config: &ExperimentConfig,
    set: &UnderspecSet,
    curves: &CurveStore,
    strategy: Strategy,
    groups: &[Vec<usize>],
    stream: u64,
) -> Result<Vec<crate::explain::Predictor>> {
    groups
        .iter()
        .enumerate()
        .map(|(e, group)| {
            let members: Vec<Mlp> = group.iter().map(|&i| set.members[i].model.clone()).collect();
            let trained: Vec<_>;
            let curve_source = if strategy.needs_curves() {
                trained = group
                    .chunks_exact(2)
                    .map(|p| {
                        let (a, b) = (set.members[p[0]].seed, set.members[p[1]].seed);
                        curves
                            .get(a, b)
                            .cloned()
                            .ok_or_else(|| Error::MissingArtifact(format!("curve for seeds ({a}, {b})")))
                    })
                    .collect::<Result<_>>()?;
                Some(CurveSource::Trained(&trained))
            } else {
                None
            };
            let seed = derive_seed(config.master_seed, &[stream, strategy_index(strategy), e as u64]);
            let params = ComposeParams {
                perturb: Some(config.perturb.spec(derive_seed(seed, &[tags::PERTURB]))),
                curves: curve_source,
                samples: config.curve.samples,
                mode: config.curve.mode,
                seed: derive_seed(seed, &[tags::SAMPLE]),
            };
            compose_ensemble(strategy, &members, &params)
        })
        .collect()
}

pub fn run_comparison(
    config: &ExperimentConfig,
    data: &Dataset,
    set: &UnderspecSet,
    curves: &mut CurveStore,
) -> Result<ComparisonReport> {
    let inputs = eval_inputs(data, config.eval_input_count);
    let mut report = ComparisonReport {
        dataset: config.dataset_name(),
        single_model_accuracy: set.retained_mean_test_acc(),
        scores: Vec::new(),
        summary: Vec::new(),
        accuracy: Vec::new(),
        attributions: Vec::new(),
    };
    for &n in &config.ensemble_sizes {
        let groups = member_sets(set, n, config.n_ensemble_sets, config.master_seed)?;
        for &strategy in &config.strategies {
            if strategy.needs_curves() && n % 2 == 1 {
                log::info!("skipping {strategy} at n = {n}: curves need member pairs");
                continue;
            }
            if strategy.needs_curves() {
                curves.ensure(&curve_pairs(set, &groups), set, data)?;
            }
            let predictors = ensembles_for(config, set, curves, strategy, &groups, n as u64)?;
            let mut tables: Vec<Vec<Explanation>> = Vec::with_capacity(predictors.len());
            for (e, p) in predictors.iter().enumerate() {
                report.accuracy.push(AccuracyRow {
                    strategy,
                    n,
                    ensemble: e,
                    constituents: p.len(),
                    test_accuracy: accuracy(p, data.test())?,
                });
                let seed = derive_seed(
                    config.master_seed,
                    &[tags::EXPLAIN, n as u64, strategy_index(strategy), e as u64],
                );
                tables.push(attribute_all(p, &config.explain, &inputs, seed)?);
            }
            for &metric in &config.metrics.names {
                for &k in &config.metrics.k {
                    let s = pairwise_stats(&tables, metric, k)?;
                    report.scores.extend(s.input_ids.iter().zip(&s.per_input).map(|(&input_id, &mean_score)| {
                        ScoreRow {
                            strategy,
                            n,
                            metric,
                            k,
                            input_id,
                            mean_score,
                        }
                    }));
                    report.summary.push(SummaryRow {
                        strategy,
                        n,
                        metric,
                        k,
                        inputs: s.inputs,
                        pairs: s.pairs,
                        pair_count: s.pair_count(),
                        input_count: s.input_ids.len(),
                    });
                }
            }
            report
                .attributions
                .extend(tables.into_iter().enumerate().map(|(ensemble, explanations)| AttributionTable {
                    strategy,
                    n,
                    ensemble,
                    explanations,
                }));
            log::info!(
                "{strategy} n={n}: {} constituents per ensemble",
                predictors.first().map_or(0, |p| p.len())
            );
        }
    }
    Ok(report)
}
