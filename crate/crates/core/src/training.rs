//! Plain mini-batch SGD and underspecification-set construction.
//!
//! With `shuffle_each_epoch` off, every seed sees exactly the same sequence
//! of batches, so trained members differ only through their initialization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::nn::{init_mlp, Batch, Mlp};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    /// Two-moons defaults.
    fn default() -> Self {
        Self {
            epochs: 40,
            learning_rate: 0.05,
            batch_size: 32,
            shuffle_each_epoch: false,
        }
    }
}

impl TrainConfig {
    pub fn new(epochs: usize, learning_rate: f64, batch_size: usize) -> Result<Self> {
        let config = Self {
            epochs,
            learning_rate,
            batch_size,
            shuffle_each_epoch: false,
        };
        config.validate()?;
        Ok(config)
    }

    /// Tuned settings for the financial benchmarks: `heloc`, `german`, `adult`,
    /// `default_credit`, `gmsc`.
    pub fn preset(name: &str) -> Option<Self> {
        let (epochs, learning_rate, batch_size) = match name {
            "heloc" => (20, 0.0004, 32),
            "german" | "german_credit" => (100, 0.004, 32),
            "adult" | "adult_income" => (40, 0.004, 128),
            "default_credit" => (10, 0.0001, 128),
            "gmsc" => (20, 0.0004, 32),
            "two_moons" => return Some(Self::default()),
            _ => return None,
        };
        Some(Self {
            epochs,
            learning_rate,
            batch_size,
            shuffle_each_epoch: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mini-batch schedule over a training partition.
///
/// Batches are precomputed once; with per-epoch shuffling the row order is
/// permuted by `rng` before slicing.
pub(crate) struct BatchPlan<'a> {
    part: Partition<'a>,
    fixed: Vec<(Vec<f64>, Vec<u8>)>,
    config: TrainConfig,
}

impl<'a> BatchPlan<'a> {
    pub(crate) fn new(part: Partition<'a>, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        if part.is_empty() {
            return Err(Error::EmptyPartition);
        }
        Ok(Self {
            part,
            fixed: part.batches(config.batch_size),
            config: *config,
        })
    }

    /// Batches for one epoch.
    pub(crate) fn epoch(&self, rng: &mut SeededRng) -> Vec<(Vec<f64>, Vec<u8>)> {
        if !self.config.shuffle_each_epoch {
            return self.fixed.clone();
        }
        let mut order: Vec<usize> = (0..self.part.len()).collect();
        rng.shuffle(&mut order);
        let dim = self.part.dim();
        order
            .chunks(self.config.batch_size)
            .map(|chunk| {
                let mut x = Vec::with_capacity(chunk.len() * dim);
                let mut y = Vec::with_capacity(chunk.len());
                for &pos in chunk {
                    let (xs, ys) = self.part.gather(pos..pos + 1);
                    x.extend(xs);
                    y.extend(ys);
                }
                (x, y)
            })
            .collect()
    }

    pub(crate) fn dim(&self) -> usize {
        self.part.dim()
    }
}

/// Vanilla SGD on mean cross-entropy over the training partition.
///
/// `shuffle_rng` is only consulted when `shuffle_each_epoch` is on.
pub fn train(mut mlp: Mlp, data: &Dataset, config: &TrainConfig, shuffle_rng: &mut SeededRng) -> Result<Mlp> {
    if mlp.input_dim() != data.dim() {
        return Err(Error::Shape {
            context: "model input width vs dataset",
            expected: data.dim(),
            got: mlp.input_dim(),
        });
    }
    let plan = BatchPlan::new(data.train(), config)?;
    for _ in 0..config.epochs {
        let epoch = plan.epoch(shuffle_rng);
        for (x, y) in &epoch {
            let grads = mlp.loss_and_param_grads(&Batch::new(x, y, plan.dim())?)?;
            mlp.apply_gradient(&grads, config.learning_rate);
        }
    }
    Ok(mlp)
}

/// Anything that assigns a class to an encoded input.
pub trait Classifier {
    fn classify(&self, x: &[f64]) -> Result<usize>;
}

impl Classifier for Mlp {
    fn classify(&self, x: &[f64]) -> Result<usize> {
        self.predict_class(x)
    }
}

/// Fraction of argmax-correct predictions. A probability tie resolves to class 0.
pub fn accuracy<C: Classifier + ?Sized>(predictor: &C, part: Partition<'_>) -> Result<f64> {
    if part.is_empty() {
        return Err(Error::EmptyPartition);
    }
    let mut correct = 0usize;
    for (_, x, y) in part.iter() {
        if predictor.classify(x)? == y as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / part.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub seed: u64,
    pub model: Mlp,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Accuracy record for a trained model, retained or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnderspecSet {
    /// Retained members in seed-list order.
    pub members: Vec<Member>,
    /// Every trained model, in seed-list order.
    pub report: Vec<MemberSummary>,
    pub filter_threshold: f64,
    pub mean_test_acc: f64,
    pub config: TrainConfig,
    pub layer_dims: Vec<usize>,
}

impl UnderspecSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn retained_mean_test_acc(&self) -> f64 {
        self.members.iter().map(|m| m.test_acc).sum::<f64>() / self.members.len().max(1) as f64
    }

    pub fn member_by_seed(&self, seed: u64) -> Option<&Member> {
        self.members.iter().find(|m| m.seed == seed)
    }
}

/// Initialize from `seed`, train, and score on both partitions.
pub fn train_member(data: &Dataset, layer_dims: &[usize], config: &TrainConfig, seed: u64) -> Result<Member> {
    let mut rng = SeededRng::new(seed);
    let init = init_mlp(layer_dims, &mut rng)?;
    let model = train(init, data, config, &mut rng)?;
    Ok(Member {
        seed,
        train_acc: accuracy(&model, data.train())?,
        test_acc: accuracy(&model, data.test())?,
        model,
    })
}

/// Keep the indices of members whose test accuracy is at least `mean - threshold`.
pub fn filter_by_accuracy(test_accs: &[f64], threshold: f64) -> (f64, Vec<bool>) {
    let mean = test_accs.iter().sum::<f64>() / test_accs.len().max(1) as f64;
    // Small slack so a model sitting exactly on the cutoff is not lost to rounding in the mean.
    let cutoff = mean - threshold - 1e-12;
    (mean, test_accs.iter().map(|&a| a >= cutoff).collect())
}

/// Train one model per seed (in parallel on the current rayon pool) and
/// discard those more than `threshold` below the mean test accuracy.
pub fn build_underspec_set(
    data: &Dataset,
    layer_dims: &[usize],
    config: &TrainConfig,
    seeds: &[u64],
    threshold: f64,
) -> Result<UnderspecSet> {
    if seeds.is_empty() {
        return Err(Error::InvalidCount("at least one seed is required".into()));
    }
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::Config(format!("filter threshold must be >= 0, got {threshold}")));
    }
    config.validate()?;
    let trained: Vec<Member> = seeds
        .par_iter()
        .map(|&seed| train_member(data, layer_dims, config, seed))
        .collect::<Result<_>>()?;
    let accs: Vec<f64> = trained.iter().map(|m| m.test_acc).collect();
    let (mean, keep) = filter_by_accuracy(&accs, threshold);
    let report: Vec<MemberSummary> = trained
        .iter()
        .zip(&keep)
        .map(|(m, &retained)| MemberSummary {
            seed: m.seed,
            train_acc: m.train_acc,
            test_acc: m.test_acc,
            retained,
        })
        .collect();
    let members: Vec<Member> = trained
        .into_iter()
        .zip(&keep)
        .filter_map(|(m, &k)| k.then_some(m))
        .collect();
    log::info!(
        "underspecification set: retained {}/{} models (mean test accuracy {:.4}, threshold {})",
        members.len(),
        seeds.len(),
        mean,
        threshold
    );
    if members.is_empty() {
        return Err(Error::DegenerateSet {
            trained: seeds.len(),
            mean,
        });
    }
    Ok(UnderspecSet {
        members,
        report,
        filter_threshold: threshold,
        mean_test_acc: mean,
        config: *config,
        layer_dims: layer_dims.to_vec(),
    })
}
