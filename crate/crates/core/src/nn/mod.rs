//! Fixed-architecture feed-forward classifier.
//!
//! Hidden layers use ReLU, the output layer a softmax. Weights are stored per
//! layer as flat row-major `(out, in)` matrices. Backpropagation is written
//! out by hand for this single architecture family and yields both parameter
//! gradients of the mean cross-entropy and input gradients of a class
//! probability.
//!
//! ReLU is given subgradient 0 at the origin.

pub(crate) mod io;

pub use io::{load_model, model_from_json, model_to_json, save_model, ModelFile, FORMAT_VERSION};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Hidden widths used throughout the experiments.
pub const DEFAULT_HIDDEN: [usize; 3] = [128, 64, 16];
pub const NUM_CLASSES: usize = 2;

/// Layer widths `[input, hidden.., 2]`.
pub fn default_dims(input_dim: usize) -> Vec<usize> {
    let mut dims = vec![input_dim];
    dims.extend_from_slice(&DEFAULT_HIDDEN);
    dims.push(NUM_CLASSES);
    dims
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Parameter gradients of the mean cross-entropy over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
    pub loss: f64,
}

impl GradBundle {
    pub fn norm(&self) -> f64 {
        self.d_weights
            .iter()
            .chain(self.d_biases.iter())
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Row-major inputs with one label per row.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    inputs: &'a [f64],
    labels: &'a [u8],
    dim: usize,
}

impl<'a> Batch<'a> {
    pub fn new(inputs: &'a [f64], labels: &'a [u8], dim: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if inputs.len() != labels.len() * dim {
            return Err(Error::Shape {
                context: "batch inputs",
                expected: labels.len() * dim,
                got: inputs.len(),
            });
        }
        Ok(Self { inputs, labels, dim })
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

    pub fn inputs(&self) -> &'a [f64] {
        self.inputs
    }

    pub fn labels(&self) -> &'a [u8] {
        self.labels
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidArchitecture(format!(
            "need at least an input and an output width, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidArchitecture(format!(
            "zero-width layer in {dims:?}"
        )));
    }
    Ok(())
}

/// He-style uniform initialization: weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`,
/// zero biases. Weights are drawn layer by layer in row-major order.
pub fn init_mlp(layer_dims: &[usize], rng: &mut SeededRng) -> Result<Mlp> {
    validate_dims(layer_dims)?;
    let mut weights = Vec::with_capacity(layer_dims.len() - 1);
    let mut biases = Vec::with_capacity(layer_dims.len() - 1);
    for pair in layer_dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = (6.0 / fan_in as f64).sqrt();
        weights.push(
            (0..fan_in * fan_out)
                .map(|_| rng.uniform_range(-bound, bound))
                .collect(),
        );
        biases.push(vec![0.0; fan_out]);
    }
    Ok(Mlp {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Numerically stable softmax in place.
pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl Mlp {
    /// Network with every parameter equal to zero.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        validate_dims(layer_dims)?;
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights: layer_dims.windows(2).map(|p| vec![0.0; p[0] * p[1]]).collect(),
            biases: layer_dims.windows(2).map(|p| vec![0.0; p[1]]).collect(),
        })
    }

    /// Build from explicit parameters, enforcing every shape and finiteness invariant.
    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_dims(&layer_dims)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::Validation(format!(
                "{layers} layers declared but {} weight and {} bias tensors given",
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in layer_dims.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] {
                return Err(Error::Validation(format!(
                    "layer {} weights have {} entries, expected {}x{}",
                    l + 1,
                    weights[l].len(),
                    pair[1],
                    pair[0]
                )));
            }
            if biases[l].len() != pair[1] {
                return Err(Error::Validation(format!(
                    "layer {} biases have {} entries, expected {}",
                    l + 1,
                    biases[l].len(),
                    pair[1]
                )));
            }
        }
        let model = Self {
            layer_dims,
            weights,
            biases,
        };
        if !model.params().all(f64::is_finite) {
            return Err(Error::Validation("non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated non-empty")
    }

    /// Number of weight (equivalently bias) tensors.
    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().chain(self.biases.iter()).map(Vec::len).sum()
    }

    /// Row-major `(out, in)` weights of layer `l` (0-based).
    pub fn weights(&self, l: usize) -> &[f64] {
        &self.weights[l]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        &self.biases[l]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.weights[l]
    }

    pub fn biases_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.biases[l]
    }

    /// All parameters, weights of every layer first, then biases.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .flat_map(|v| v.iter().copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flat_map(|v| v.iter_mut())
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.layer_dims == other.layer_dims
    }

    pub(crate) fn check_same_architecture(&self, other: &Mlp) -> Result<()> {
        if self.same_architecture(other) {
            Ok(())
        } else {
            Err(Error::Shape {
                context: "architecture",
                expected: self.num_params(),
                got: other.num_params(),
            })
        }
    }

    /// Euclidean distance between flattened parameter vectors.
    pub fn l2_distance(&self, other: &Mlp) -> Result<f64> {
        self.check_same_architecture(other)?;
        Ok(self
            .params()
            .zip(other.params())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// `sum_i coeff_i * model_i`, parameter-wise.
    pub fn linear_combination(terms: &[(f64, &Mlp)]) -> Result<Mlp> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::InvalidCount("empty linear combination".into()))?;
        for (_, m) in terms {
            first.check_same_architecture(m)?;
        }
        let mut out = Mlp::zeros(&first.layer_dims)?;
        for (l, _) in first.layer_dims.windows(2).enumerate() {
            for (c, m) in terms {
                axpy(*c, &m.weights[l], &mut out.weights[l]);
                axpy(*c, &m.biases[l], &mut out.biases[l]);
            }
        }
        Ok(out)
    }

    /// `self -= step * grads`.
    pub fn apply_gradient(&mut self, grads: &GradBundle, step: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.d_weights) {
            axpy(-step, g, w);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.d_biases) {
            axpy(-step, g, b);
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                context: "input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("input"));
        }
        Ok(())
    }

    /// Activations of every layer for one input; the last entry holds logits.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layer_dims.len());
        acts.push(x.to_vec());
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let input = &acts[l];
            let w = &self.weights[l];
            let mut out = Vec::with_capacity(fan_out);
            for i in 0..fan_out {
                let z = self.biases[l][i] + dot(&w[i * fan_in..(i + 1) * fan_in], input);
                out.push(if l < last { z.max(0.0) } else { z });
            }
            acts.push(out);
        }
        acts
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.trace(x).pop().expect("output layer"))
    }

    /// Softmax class probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.logits(x)?;
        softmax_in_place(&mut z);
        Ok(z)
    }

    /// Class with the largest probability; ties go to the lower class index.
    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    /// Gradient of the softmax probability of `target_class` with respect to the input,
    /// together with the probabilities themselves.
    pub fn forward_and_input_gradient(
        &self,
        x: &[f64],
        target_class: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(x)?;
        if target_class >= self.output_dim() {
            return Err(Error::Shape {
                context: "target class",
                expected: self.output_dim(),
                got: target_class,
            });
        }
        let mut acts = self.trace(x);
        let mut probs = acts.pop().expect("output layer");
        softmax_in_place(&mut probs);
        let pc = probs[target_class];
        // d p_c / d z_j = p_c (delta_cj - p_j)
        let mut delta: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(j, &pj)| {
                let indicator = if j == target_class { 1.0 } else { 0.0 };
                pc * (indicator - pj)
            })
            .collect();
        for l in (0..self.num_layers()).rev() {
            let fan_in = self.layer_dims[l];
            let w = &self.weights[l];
            let mut prev = vec![0.0; fan_in];
            for (i, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, &w[i * fan_in..(i + 1) * fan_in], &mut prev);
                }
            }
            if l > 0 {
                for (p, &a) in prev.iter_mut().zip(&acts[l]) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        Ok((probs, delta))
    }

    /// `d softmax(f(x))[target_class] / dx`.
    pub fn input_gradient(&self, x: &[f64], target_class: usize) -> Result<Vec<f64>> {
        Ok(self.forward_and_input_gradient(x, target_class)?.1)
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, batch: &Batch<'_>) -> Result<f64> {
        self.check_batch(batch)?;
        let logits = self.batch_forward(batch.inputs, batch.len()).pop().expect("output");
        let k = self.output_dim();
        let total: f64 = batch
            .labels
            .iter()
            .enumerate()
            .map(|(b, &y)| cross_entropy(&logits[b * k..(b + 1) * k], y as usize))
            .sum();
        Ok(total / batch.len() as f64)
    }

    fn check_batch(&self, batch: &Batch<'_>) -> Result<()> {
        if batch.dim != self.input_dim() {
            return Err(Error::Shape {
                context: "batch width",
                expected: self.input_dim(),
                got: batch.dim,
            });
        }
        if batch.labels.iter().any(|&y| y as usize >= self.output_dim()) {
            return Err(Error::Validation("label outside the output classes".into()));
        }
        if !batch.inputs.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("batch inputs"));
        }
        Ok(())
    }

    /// Row-major activations for a whole batch; the last entry holds logits.
    fn batch_forward(&self, inputs: &[f64], rows: usize) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layer_dims.len());
        acts.push(inputs.to_vec());
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = &self.weights[l];
            let bias = &self.biases[l];
            let input = &acts[l];
            let mut out = vec![0.0; rows * fan_out];
            for b in 0..rows {
                let row = &input[b * fan_in..(b + 1) * fan_in];
                for i in 0..fan_out {
                    let z = bias[i] + dot(&w[i * fan_in..(i + 1) * fan_in], row);
                    out[b * fan_out + i] = if l < last { z.max(0.0) } else { z };
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Mean cross-entropy and its exact gradient with respect to every parameter.
    pub fn loss_and_param_grads(&self, batch: &Batch<'_>) -> Result<GradBundle> {
        self.check_batch(batch)?;
        let rows = batch.len();
        let k = self.output_dim();
        let mut acts = self.batch_forward(batch.inputs, rows);
        let logits = acts.pop().expect("output layer");

        let scale = 1.0 / rows as f64;
        let mut loss = 0.0;
        let mut delta = vec![0.0; rows * k];
        for (b, &y) in batch.labels.iter().enumerate() {
            let z = &logits[b * k..(b + 1) * k];
            loss += cross_entropy(z, y as usize);
            let d = &mut delta[b * k..(b + 1) * k];
            d.copy_from_slice(z);
            softmax_in_place(d);
            d[y as usize] -= 1.0;
            for v in d.iter_mut() {
                *v *= scale;
            }
        }

        let mut d_weights: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut d_biases: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let input = &acts[l];
            let w = &self.weights[l];
            let dw = &mut d_weights[l];
            let db = &mut d_biases[l];
            let mut prev = if l > 0 { vec![0.0; rows * fan_in] } else { Vec::new() };
            for b in 0..rows {
                let row = &input[b * fan_in..(b + 1) * fan_in];
                let d_row = &delta[b * fan_out..(b + 1) * fan_out];
                for (i, &d) in d_row.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    db[i] += d;
                    axpy(d, row, &mut dw[i * fan_in..(i + 1) * fan_in]);
                    if l > 0 {
                        axpy(d, &w[i * fan_in..(i + 1) * fan_in], &mut prev[b * fan_in..(b + 1) * fan_in]);
                    }
                }
            }
            if l > 0 {
                for (p, &a) in prev.iter_mut().zip(input.iter()) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }

        let loss = loss * scale;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        Ok(GradBundle {
            d_weights,
            d_biases,
            loss,
        })
    }
}

/// `-log softmax(z)[y]`, via log-sum-exp.
fn cross_entropy(z: &[f64], y: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - z[y]
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_net(dims: &[usize], seed: u64) -> Mlp {
        let mut rng = SeededRng::new(seed);
        let mut m = init_mlp(dims, &mut rng).unwrap();
        for b in m.biases.iter_mut().flatten() {
            *b = 0.1 * rng.gaussian();
        }
        m
    }

    #[test]
    fn init_is_deterministic_in_the_seed() {
        let dims = [2, 128, 64, 16, 2];
        let a = init_mlp(&dims, &mut SeededRng::new(7)).unwrap();
        let b = init_mlp(&dims, &mut SeededRng::new(7)).unwrap();
        assert!(a.params().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = init_mlp(&dims, &mut SeededRng::new(8)).unwrap();
        assert!(a.params().zip(c.params()).any(|(x, y)| x != y));
    }

    #[test]
    fn init_respects_fan_in_bound_and_zero_biases() {
        let dims = [5, 32, 2];
        let m = init_mlp(&dims, &mut SeededRng::new(1)).unwrap();
        let bound = (6.0f64 / 5.0).sqrt();
        assert!(m.weights(0).iter().all(|w| w.abs() <= bound));
        assert!(m.biases.iter().flatten().all(|&b| b == 0.0));
        assert_eq!(m.weights(1).len(), 64);
    }

    #[test]
    fn degenerate_architectures_are_rejected() {
        let mut rng = SeededRng::new(0);
        assert!(matches!(init_mlp(&[2], &mut rng), Err(Error::InvalidArchitecture(_))));
        assert!(matches!(init_mlp(&[], &mut rng), Err(Error::InvalidArchitecture(_))));
        assert!(matches!(init_mlp(&[2, 0, 2], &mut rng), Err(Error::InvalidArchitecture(_))));
    }

    #[test]
    fn zero_net_outputs_half_and_has_zero_gradient() {
        let m = Mlp::zeros(&[3, 4, 2]).unwrap();
        let x = [0.3, -1.2, 4.0];
        assert_eq!(m.forward(&x).unwrap(), vec![0.5, 0.5]);
        assert!(m.input_gradient(&x, 1).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn hand_built_single_hidden_unit() {
        // x -> h = relu(2x + 1) -> logits [0, 3h - 1]
        let m = Mlp::from_parts(
            vec![1, 1, 2],
            vec![vec![2.0], vec![0.0, 3.0]],
            vec![vec![1.0], vec![0.0, -1.0]],
        )
        .unwrap();
        // x = 0.5: h = 2, logits [0, 5], p1 = 1 / (1 + e^-5)
        let p = m.forward(&[0.5]).unwrap();
        let expected = 1.0 / (1.0 + (-5.0f64).exp());
        assert!((p[1] - expected).abs() < 1e-15);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
        // dp1/dx = p1 (1 - p1) * 3 * 2
        let g = m.input_gradient(&[0.5], 1).unwrap();
        assert!((g[0] - expected * (1.0 - expected) * 6.0).abs() < 1e-14);
        // x = -1: h = 0 (inactive), gradient vanishes
        assert_eq!(m.input_gradient(&[-1.0], 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn forward_rejects_bad_inputs() {
        let m = Mlp::zeros(&[2, 3, 2]).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(Error::Shape { .. })));
        assert!(matches!(m.forward(&[1.0, f64::NAN]), Err(Error::NonFinite(_))));
        assert!(matches!(m.input_gradient(&[1.0, 2.0, 3.0], 1), Err(Error::Shape { .. })));
    }

    #[test]
    fn softmax_survives_large_logits() {
        let mut z = vec![1000.0, -1000.0];
        softmax_in_place(&mut z);
        assert_eq!(z, vec![1.0, 0.0]);
    }

    #[test]
    fn confident_correct_predictions_have_vanishing_loss() {
        let mut m = Mlp::zeros(&[2, 3, 2]).unwrap();
        m.biases_mut(1).copy_from_slice(&[-40.0, 40.0]);
        let inputs = [0.1, 0.2, -0.3, 0.4];
        let labels = [1u8, 1];
        let g = m.loss_and_param_grads(&Batch::new(&inputs, &labels, 2).unwrap()).unwrap();
        assert!(g.loss < 1e-30);
        assert!(g.norm() < 1e-30);
    }

    #[test]
    fn duplicated_batch_gives_same_loss_and_gradients() {
        let m = random_net(&[3, 6, 4, 2], 11);
        let mut rng = SeededRng::new(5);
        let inputs: Vec<f64> = (0..15).map(|_| rng.gaussian()).collect();
        let labels = [0u8, 1, 1, 0, 1];
        let mut dup_inputs = Vec::new();
        let mut dup_labels = Vec::new();
        for b in 0..5 {
            for _ in 0..2 {
                dup_inputs.extend_from_slice(&inputs[b * 3..(b + 1) * 3]);
                dup_labels.push(labels[b]);
            }
        }
        let a = m.loss_and_param_grads(&Batch::new(&inputs, &labels, 3).unwrap()).unwrap();
        let b = m
            .loss_and_param_grads(&Batch::new(&dup_inputs, &dup_labels, 3).unwrap())
            .unwrap();
        assert!((a.loss - b.loss).abs() < 1e-14);
        for (x, y) in a.d_weights.iter().flatten().zip(b.d_weights.iter().flatten()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn empty_batch_is_rejected() {
        assert!(matches!(Batch::new(&[], &[], 2), Err(Error::EmptyBatch)));
    }

    #[test]
    fn class_gradients_are_antisymmetric() {
        let m = random_net(&[4, 8, 2], 3);
        let x = [0.2, -0.7, 1.1, 0.05];
        let g0 = m.input_gradient(&x, 0).unwrap();
        let g1 = m.input_gradient(&x, 1).unwrap();
        for (a, b) in g0.iter().zip(&g1) {
            assert!((a + b).abs() <= 1e-15 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn loss_matches_gradient_bundle_loss() {
        let m = random_net(&[2, 5, 2], 4);
        let inputs = [0.5, -0.5, 1.0, 2.0];
        let labels = [0u8, 1];
        let batch = Batch::new(&inputs, &labels, 2).unwrap();
        let g = m.loss_and_param_grads(&batch).unwrap();
        assert!((m.loss(&batch).unwrap() - g.loss).abs() < 1e-15);
    }

    #[test]
    fn linear_combination_and_distance() {
        let a = random_net(&[2, 3, 2], 1);
        let b = random_net(&[2, 3, 2], 2);
        let mid = Mlp::linear_combination(&[(0.5, &a), (0.5, &b)]).unwrap();
        let d_ab = a.l2_distance(&b).unwrap();
        assert!((a.l2_distance(&mid).unwrap() - d_ab / 2.0).abs() < 1e-12);
        let other = random_net(&[2, 4, 2], 1);
        assert!(a.l2_distance(&other).is_err());
    }
}
