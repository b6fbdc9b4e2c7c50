//! Quadratic Bezier paths in weight space.
//!
//! `phi(t) = (1-t)^2 w1 + 2t(1-t) theta + t^2 w2` for `t` in `[0, 1]`.
//! Training draws one `t ~ U(0, 1)` per mini-batch, evaluates the loss at
//! `phi(t)` and pushes the parameter gradient back through the (linear)
//! parametrization: each control point receives the gradient scaled by its
//! Bezier coefficient.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{init_mlp, io::json_error, Batch, GradBundle, Mlp, ModelFile, FORMAT_VERSION};
use crate::rng::SeededRng;
use crate::training::{accuracy, BatchPlan, TrainConfig};

const T_STREAM_TAG: u64 = 0xc0de_c0de;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveParams {
    pub w1: Mlp,
    pub theta: Mlp,
    pub w2: Mlp,
    pub endpoints_trainable: bool,
}

impl CurveParams {
    pub fn new(w1: Mlp, theta: Mlp, w2: Mlp, endpoints_trainable: bool) -> Result<Self> {
        w1.check_same_architecture(&theta)?;
        w1.check_same_architecture(&w2)?;
        Ok(Self {
            w1,
            theta,
            w2,
            endpoints_trainable,
        })
    }

    /// Curve whose bend sits at the midpoint, i.e. the straight segment `w1 -> w2`.
    pub fn linear(w1: Mlp, w2: Mlp, endpoints_trainable: bool) -> Result<Self> {
        let theta = Mlp::linear_combination(&[(0.5, &w1), (0.5, &w2)])?;
        Self::new(w1, theta, w2, endpoints_trainable)
    }

    pub fn layer_dims(&self) -> &[usize] {
        self.w1.layer_dims()
    }
}

/// `[(1-t)^2, 2t(1-t), t^2]`, coefficients of `w1`, `theta`, `w2`.
pub fn bezier_coefficients(t: f64) -> [f64; 3] {
    let s = 1.0 - t;
    [s * s, 2.0 * t * s, t * t]
}

fn check_t(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Range(t))
    }
}

/// Parameters at position `t` on the curve. The endpoints are returned exactly.
pub fn bezier_point(curve: &CurveParams, t: f64) -> Result<Mlp> {
    check_t(t)?;
    if t == 0.0 {
        return Ok(curve.w1.clone());
    }
    if t == 1.0 {
        return Ok(curve.w2.clone());
    }
    let [a, b, c] = bezier_coefficients(t);
    Mlp::linear_combination(&[(a, &curve.w1), (b, &curve.theta), (c, &curve.w2)])
}

fn scaled(g: &GradBundle, factor: f64) -> GradBundle {
    GradBundle {
        d_weights: g.d_weights.iter().map(|w| w.iter().map(|v| v * factor).collect()).collect(),
        d_biases: g.d_biases.iter().map(|b| b.iter().map(|v| v * factor).collect()).collect(),
        loss: g.loss,
    }
}

/// Loss at `phi(t)` and its gradient with respect to each control point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveGradients {
    pub loss: f64,
    pub d_w1: GradBundle,
    pub d_theta: GradBundle,
    pub d_w2: GradBundle,
}

pub fn curve_gradients(curve: &CurveParams, batch: &Batch<'_>, t: f64) -> Result<CurveGradients> {
    let point = bezier_point(curve, t)?;
    let g = point.loss_and_param_grads(batch)?;
    let [a, b, c] = bezier_coefficients(t);
    Ok(CurveGradients {
        loss: g.loss,
        d_w1: scaled(&g, a),
        d_theta: scaled(&g, b),
        d_w2: scaled(&g, c),
    })
}

fn run_curve_training(
    mut curve: CurveParams,
    data: &Dataset,
    config: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<CurveParams> {
    if curve.w1.input_dim() != data.dim() {
        return Err(Error::Shape {
            context: "curve input width vs dataset",
            expected: data.dim(),
            got: curve.w1.input_dim(),
        });
    }
    let plan = BatchPlan::new(data.train(), config)?;
    let lr = config.learning_rate;
    for _ in 0..config.epochs {
        for (x, y) in &plan.epoch(rng) {
            let t = rng.uniform();
            let point = bezier_point(&curve, t)?;
            let g = point.loss_and_param_grads(&Batch::new(x, y, plan.dim())?)?;
            let [a, b, c] = bezier_coefficients(t);
            curve.theta.apply_gradient(&g, lr * b);
            if curve.endpoints_trainable {
                curve.w1.apply_gradient(&g, lr * a);
                curve.w2.apply_gradient(&g, lr * c);
            }
        }
    }
    Ok(curve)
}

/// Fit the bend of a curve between two fixed trained models.
///
/// `theta` starts at the midpoint of the endpoints; the endpoints are never
/// modified.
pub fn train_curve_fixed(
    w1: &Mlp,
    w2: &Mlp,
    data: &Dataset,
    config: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<CurveParams> {
    let curve = CurveParams::linear(w1.clone(), w2.clone(), false)?;
    run_curve_training(curve, data, config, rng)
}

/// Train a whole curve from scratch.
///
/// The start point is initialized exactly like a set member trained from
/// `start_seed` (and the end point from `end_seed`); `theta` starts at their
/// midpoint. All three control points are trained with the given config.
pub fn train_curve_scratch(
    layer_dims: &[usize],
    start_seed: u64,
    end_seed: u64,
    data: &Dataset,
    config: &TrainConfig,
) -> Result<CurveParams> {
    config.validate()?;
    let w1 = init_mlp(layer_dims, &mut SeededRng::new(start_seed))?;
    let w2 = init_mlp(layer_dims, &mut SeededRng::new(end_seed))?;
    let curve = CurveParams::linear(w1, w2, true)?;
    let mut rng = SeededRng::derive(start_seed, &[end_seed, T_STREAM_TAG]);
    run_curve_training(curve, data, config, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// `t = i / (s - 1)`, endpoints included; a single sample sits at `t = 0.5`.
    Grid,
    /// `s` independent `U(0, 1)` draws.
    Uniform,
}

pub fn sample_positions(s: usize, mode: SampleMode, rng: &mut SeededRng) -> Result<Vec<f64>> {
    if s == 0 {
        return Err(Error::InvalidCount("curve sample count must be at least 1".into()));
    }
    Ok(match mode {
        SampleMode::Grid if s == 1 => vec![0.5],
        SampleMode::Grid => (0..s).map(|i| i as f64 / (s - 1) as f64).collect(),
        SampleMode::Uniform => (0..s).map(|_| rng.uniform()).collect(),
    })
}

pub fn sample_curve(curve: &CurveParams, s: usize, mode: SampleMode, rng: &mut SeededRng) -> Result<Vec<Mlp>> {
    sample_positions(s, mode, rng)?
        .into_iter()
        .map(|t| bezier_point(curve, t))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub t: f64,
    /// Mean cross-entropy over the training partition.
    pub loss: f64,
    /// Test-partition accuracy.
    pub accuracy: f64,
}

/// Loss and accuracy at `points` evenly spaced positions along the curve.
pub fn loss_profile(curve: &CurveParams, data: &Dataset, points: usize) -> Result<Vec<ProfilePoint>> {
    let ts = sample_positions(points, SampleMode::Grid, &mut SeededRng::new(0))?;
    ts.into_iter()
        .map(|t| {
            let m = bezier_point(curve, t)?;
            Ok(ProfilePoint {
                t,
                loss: data.train().loss(&m)?,
                accuracy: accuracy(&m, data.test())?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    /// `fixed` or `scratch`.
    pub method: String,
    pub start_seed: u64,
    pub end_seed: u64,
    pub train: TrainConfig,
    pub config_hash: String,
}

/// On-disk form of a trained curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveFile {
    pub format_version: u32,
    pub endpoints_trainable: bool,
    pub metadata: CurveMetadata,
    pub w1: ModelFile,
    pub theta: ModelFile,
    pub w2: ModelFile,
}

impl CurveFile {
    pub fn new(curve: &CurveParams, metadata: CurveMetadata) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            endpoints_trainable: curve.endpoints_trainable,
            metadata,
            w1: ModelFile::from_mlp(&curve.w1),
            theta: ModelFile::from_mlp(&curve.theta),
            w2: ModelFile::from_mlp(&curve.w2),
        }
    }

    pub fn into_curve(self) -> Result<(CurveParams, CurveMetadata)> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported curve format_version {}",
                self.format_version
            )));
        }
        let curve = CurveParams::new(
            self.w1.into_mlp()?,
            self.theta.into_mlp()?,
            self.w2.into_mlp()?,
            self.endpoints_trainable,
        )?;
        Ok((curve, self.metadata))
    }
}

pub fn save_curve(curve: &CurveParams, metadata: CurveMetadata, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(&CurveFile::new(curve, metadata)).expect("curve serialization cannot fail");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_curve(path: impl AsRef<Path>) -> Result<(CurveParams, CurveMetadata)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CurveFile = serde_json::from_str(&text).map_err(|e| json_error(e, &path.display().to_string()))?;
    file.into_curve()
}
