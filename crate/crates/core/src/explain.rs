//! Saliency and SmoothGrad explanations for single models and composed ensembles.
//!
//! Explanations are always taken with respect to the positive class (index 1).
//! For averaging predictors the gradient of the mean probability is the mean
//! of the constituent gradients, which is what we compute.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::landscape::{perturb_model, sample_curve, train_curve_fixed, CurveParams, PerturbSpec, SampleMode};
use crate::nn::{argmax, Mlp, NUM_CLASSES};
use crate::rng::{derive_seed, SeededRng};
use crate::training::{Classifier, TrainConfig};

pub const POSITIVE_CLASS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    Single,
    Perturbed,
    CurveSampled,
    AverageEnsemble,
    MajorityEnsemble,
}

impl PredictorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictorKind::Single => "single",
            PredictorKind::Perturbed => "perturbed",
            PredictorKind::CurveSampled => "curve-sampled",
            PredictorKind::AverageEnsemble => "average-ensemble",
            PredictorKind::MajorityEnsemble => "majority-ensemble",
        }
    }

    pub fn is_majority(&self) -> bool {
        matches!(self, PredictorKind::MajorityEnsemble)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Probabilities(Vec<f64>),
    Label(usize),
}

/// A flat collection of networks behind one prediction rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    kind: PredictorKind,
    constituents: Vec<Mlp>,
}

impl Predictor {
    pub fn new(kind: PredictorKind, constituents: Vec<Mlp>) -> Result<Self> {
        let first = constituents.first().ok_or(Error::EmptyEnsemble)?;
        if kind == PredictorKind::Single && constituents.len() != 1 {
            return Err(Error::InvalidCount(format!(
                "single predictor takes one model, got {}",
                constituents.len()
            )));
        }
        if first.output_dim() != NUM_CLASSES {
            return Err(Error::InvalidArchitecture(format!(
                "explanations need {NUM_CLASSES} output classes, got {}",
                first.output_dim()
            )));
        }
        for c in &constituents[1..] {
            first.check_same_architecture(c)?;
        }
        Ok(Self { kind, constituents })
    }

    pub fn single(model: Mlp) -> Result<Self> {
        Self::new(PredictorKind::Single, vec![model])
    }

    pub fn kind(&self) -> PredictorKind {
        self.kind
    }

    pub fn constituents(&self) -> &[Mlp] {
        &self.constituents
    }

    pub fn len(&self) -> usize {
        self.constituents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constituents.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.constituents[0].input_dim()
    }

    /// Mean of the constituent softmax outputs, whatever the kind.
    ///
    /// Accumulated as a running mean so that identical constituents reproduce
    /// their common output bit for bit.
    pub fn mean_probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        running_mean(&self.constituents, |m| m.forward(x))
    }

    /// Votes per class; ties resolve to the lower class index.
    pub fn vote(&self, x: &[f64]) -> Result<usize> {
        let mut counts = [0usize; NUM_CLASSES];
        for m in &self.constituents {
            counts[m.predict_class(x)?] += 1;
        }
        let counts: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        Ok(argmax(&counts))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if self.kind.is_majority() {
            Ok(Prediction::Label(self.vote(x)?))
        } else {
            Ok(Prediction::Probabilities(self.mean_probabilities(x)?))
        }
    }

    /// Mean gradient of the positive-class probability over all constituents.
    pub fn mean_input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        running_mean(&self.constituents, |m| m.input_gradient(x, POSITIVE_CLASS))
    }
}

impl Classifier for Predictor {
    fn classify(&self, x: &[f64]) -> Result<usize> {
        match self.predict(x)? {
            Prediction::Label(c) => Ok(c),
            Prediction::Probabilities(p) => Ok(argmax(&p)),
        }
    }
}

fn running_mean(models: &[Mlp], f: impl Fn(&Mlp) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let mut iter = models.iter();
    let mut mean = f(iter.next().ok_or(Error::EmptyEnsemble)?)?;
    for (i, m) in iter.enumerate() {
        let n = (i + 2) as f64;
        for (acc, v) in mean.iter_mut().zip(f(m)?) {
            *acc += (v - *acc) / n;
        }
    }
    Ok(mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodTag {
    Saliency,
    Smoothgrad,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::Saliency => "saliency",
            MethodTag::Smoothgrad => "smoothgrad",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub values: Vec<f64>,
    pub method: MethodTag,
    pub target_class: usize,
    pub input_id: usize,
}

impl Explanation {
    fn new(values: Vec<f64>, method: MethodTag, input_id: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("explanation"));
        }
        Ok(Self {
            values,
            method,
            target_class: POSITIVE_CLASS,
            input_id,
        })
    }
}

fn require_average(p: &Predictor, method: &'static str) -> Result<()> {
    if p.kind().is_majority() {
        return Err(Error::UnsupportedMethod {
            method,
            kind: p.kind().as_str(),
        });
    }
    Ok(())
}

/// Gradient of the predictor's positive-class probability at `x`.
pub fn saliency(p: &Predictor, x: &[f64], input_id: usize) -> Result<Explanation> {
    require_average(p, "saliency")?;
    Explanation::new(p.mean_input_gradient(x)?, MethodTag::Saliency, input_id)
}

fn smoothgrad_values(p: &Predictor, x: &[f64], sigma: f64, samples: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("smoothgrad sigma must be finite and >= 0, got {sigma}")));
    }
    if samples == 0 {
        return Err(Error::InvalidCount("smoothgrad needs at least one sample".into()));
    }
    if sigma == 0.0 {
        return p.mean_input_gradient(x);
    }
    let mut mean = vec![0.0; x.len()];
    let mut noisy = vec![0.0; x.len()];
    for i in 0..samples {
        for (n, &v) in noisy.iter_mut().zip(x) {
            *n = v + sigma * rng.gaussian();
        }
        let g = p.mean_input_gradient(&noisy)?;
        let count = (i + 1) as f64;
        for (acc, v) in mean.iter_mut().zip(g) {
            *acc += (v - *acc) / count;
        }
    }
    Ok(mean)
}

/// Saliency averaged over `samples` copies of `x` with `N(0, sigma^2)` noise.
pub fn smoothgrad(
    p: &Predictor,
    x: &[f64],
    sigma: f64,
    samples: usize,
    rng: &mut SeededRng,
    input_id: usize,
) -> Result<Explanation> {
    require_average(p, "smoothgrad")?;
    Explanation::new(smoothgrad_values(p, x, sigma, samples, rng)?, MethodTag::Smoothgrad, input_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ExplainMethod {
    #[default]
    Saliency,
    Smoothgrad { sigma: f64, samples: usize },
}

impl ExplainMethod {
    pub fn smoothgrad_default() -> Self {
        ExplainMethod::Smoothgrad {
            sigma: 0.1,
            samples: 50,
        }
    }

    pub fn tag(&self) -> MethodTag {
        match self {
            ExplainMethod::Saliency => MethodTag::Saliency,
            ExplainMethod::Smoothgrad { .. } => MethodTag::Smoothgrad,
        }
    }
}

/// Explanation for any predictor kind.
///
/// Majority ensembles have no gradient of their own; they are explained by the
/// mean constituent saliency, the same attribution as the averaging ensemble
/// over the same members.
pub fn attribute(
    p: &Predictor,
    method: &ExplainMethod,
    x: &[f64],
    input_id: usize,
    rng: &mut SeededRng,
) -> Result<Explanation> {
    let values = match *method {
        ExplainMethod::Saliency => p.mean_input_gradient(x)?,
        ExplainMethod::Smoothgrad { sigma, samples } => smoothgrad_values(p, x, sigma, samples, rng)?,
    };
    Explanation::new(values, method.tag(), input_id)
}

/// Explain every `(input_id, row)` in parallel. SmoothGrad noise for input
/// `id` comes from a stream derived from `(seed, id)`, so results do not depend
/// on scheduling.
pub fn attribute_all(
    p: &Predictor,
    method: &ExplainMethod,
    inputs: &[(usize, &[f64])],
    seed: u64,
) -> Result<Vec<Explanation>> {
    inputs
        .par_iter()
        .map(|&(id, x)| attribute(p, method, x, id, &mut SeededRng::derive(seed, &[id as u64])))
        .collect()
}

/// CSV with columns `input_id,method,feature_1..feature_d`.
pub fn write_attributions(path: impl AsRef<Path>, explanations: &[Explanation]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let d = explanations.first().map_or(0, |e| e.values.len());
    let mut header = String::from("input_id,method");
    for j in 1..=d {
        header.push_str(&format!(",feature_{j}"));
    }
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for e in explanations {
        let mut line = format!("{},{}", e.input_id, e.method.as_str());
        for v in &e.values {
            line.push_str(&format!(",{v:?}"));
        }
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    VanillaAverage,
    VanillaMajority,
    Perturb,
    Connect,
    Combine,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::VanillaAverage,
        Strategy::VanillaMajority,
        Strategy::Perturb,
        Strategy::Connect,
        Strategy::Combine,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::VanillaAverage => "vanilla-average",
            Strategy::VanillaMajority => "vanilla-majority",
            Strategy::Perturb => "perturb",
            Strategy::Connect => "connect",
            Strategy::Combine => "combine",
        }
    }

    pub fn needs_curves(&self) -> bool {
        matches!(self, Strategy::Connect | Strategy::Combine)
    }

    pub fn needs_perturbation(&self) -> bool {
        matches!(self, Strategy::Perturb | Strategy::Combine)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

/// Where connect/combine get their curves from: one curve per consecutive
/// member pair `(0, 1), (2, 3), ...`.
#[derive(Debug, Clone, Copy)]
pub enum CurveSource<'a> {
    Trained(&'a [CurveParams]),
    Train {
        data: &'a Dataset,
        config: TrainConfig,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct ComposeParams<'a> {
    pub perturb: Option<PerturbSpec>,
    pub curves: Option<CurveSource<'a>>,
    pub samples: usize,
    pub mode: SampleMode,
    /// Seeds uniform curve sampling.
    pub seed: u64,
}

impl Default for ComposeParams<'_> {
    fn default() -> Self {
        Self {
            perturb: None,
            curves: None,
            samples: 10,
            mode: SampleMode::Grid,
            seed: 0,
        }
    }
}

const COMBINE_TAG: u64 = 0x00c0_3b1e;

fn perturb_all(models: &[Mlp], spec: &PerturbSpec, tag: &[u64]) -> Result<Vec<Mlp>> {
    let per_model: Vec<Vec<Mlp>> = models
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let mut tags = tag.to_vec();
            tags.push(i as u64);
            let seeded = spec.with_seed(derive_seed(spec.seed, &tags));
            Ok(perturb_model(m, &seeded)?.variants)
        })
        .collect::<Result<_>>()?;
    Ok(per_model.into_iter().flatten().collect())
}

/// Fixed-endpoint curves between consecutive member pairs.
pub fn train_pair_curves(members: &[Mlp], data: &Dataset, config: &TrainConfig, seed: u64) -> Result<Vec<CurveParams>> {
    if !members.len().is_multiple_of(2) {
        return Err(Error::Pairing(format!("{} members cannot be split into pairs", members.len())));
    }
    members
        .par_chunks(2)
        .enumerate()
        .map(|(i, pair)| train_curve_fixed(&pair[0], &pair[1], data, config, &mut SeededRng::derive(seed, &[i as u64])))
        .collect()
}

fn curve_samples(members: &[Mlp], params: &ComposeParams<'_>) -> Result<Vec<Mlp>> {
    if !members.len().is_multiple_of(2) {
        return Err(Error::Pairing(format!("{} members cannot be split into pairs", members.len())));
    }
    let owned;
    let curves: &[CurveParams] = match params.curves {
        Some(CurveSource::Trained(c)) => c,
        Some(CurveSource::Train { data, config, seed }) => {
            owned = train_pair_curves(members, data, &config, seed)?;
            &owned
        }
        None => return Err(Error::Config("connect/combine need curves or a curve training source".into())),
    };
    if curves.len() != members.len() / 2 {
        return Err(Error::Pairing(format!(
            "{} members need {} curves, got {}",
            members.len(),
            members.len() / 2,
            curves.len()
        )));
    }
    let mut out = Vec::with_capacity(curves.len() * params.samples);
    for (i, c) in curves.iter().enumerate() {
        let mut rng = SeededRng::derive(params.seed, &[i as u64]);
        out.extend(sample_curve(c, params.samples, params.mode, &mut rng)?);
    }
    Ok(out)
}

/// Build the ensemble predictor for `strategy` from `members`.
///
/// Constituent counts: vanilla `n`, perturb `n * m`, connect `n/2 * s`,
/// combine `n/2 * s * m`.
pub fn compose_ensemble(strategy: Strategy, members: &[Mlp], params: &ComposeParams<'_>) -> Result<Predictor> {
    if members.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let spec = || {
        params
            .perturb
            .ok_or_else(|| Error::Config(format!("strategy `{strategy}` needs a perturbation spec")))
    };
    match strategy {
        Strategy::VanillaAverage => Predictor::new(PredictorKind::AverageEnsemble, members.to_vec()),
        Strategy::VanillaMajority => Predictor::new(PredictorKind::MajorityEnsemble, members.to_vec()),
        Strategy::Perturb => Predictor::new(PredictorKind::Perturbed, perturb_all(members, &spec()?, &[])?),
        Strategy::Connect => Predictor::new(PredictorKind::CurveSampled, curve_samples(members, params)?),
        Strategy::Combine => {
            let spec = spec()?;
            let samples = curve_samples(members, params)?;
            Predictor::new(PredictorKind::AverageEnsemble, perturb_all(&samples, &spec, &[COMBINE_TAG])?)
        }
    }
}
