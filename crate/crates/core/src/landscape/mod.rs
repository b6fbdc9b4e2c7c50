//! Local and global exploration of the loss landscape around trained models.
//!
//! Local: Gaussian noise on one weight or bias tensor ([`perturb_model`]).
//! Global: quadratic Bezier curves between two parameter vectors, trained so
//! that points along the curve keep a low loss ([`curve`]).

pub mod curve;

pub use curve::{
    bezier_coefficients, bezier_point, curve_gradients, load_curve, loss_profile, sample_curve, sample_positions,
    save_curve, train_curve_fixed, train_curve_scratch, CurveFile, CurveGradients, CurveMetadata, CurveParams,
    ProfilePoint, SampleMode,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbTarget {
    Weights,
    Biases,
}

impl PerturbTarget {
    pub fn as_str(&self) -> &'static str {
        match self {
            PerturbTarget::Weights => "weights",
            PerturbTarget::Biases => "biases",
        }
    }
}

/// Which tensor to perturb, how strongly and how many times.
///
/// `layer` is 1-based: layer 1 holds the weights/biases between the input and
/// the first hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub layer: usize,
    pub target: PerturbTarget,
    pub sigma: f64,
    pub count: usize,
    pub seed: u64,
}

impl PerturbSpec {
    /// Settings used for the financial benchmarks (first layer, 50 draws,
    /// 100 for HELOC).
    pub fn preset(dataset: &str, seed: u64) -> Option<Self> {
        let (target, sigma, count) = match dataset {
            "heloc" => (PerturbTarget::Weights, 0.2, 100),
            "german" | "german_credit" => (PerturbTarget::Weights, 0.2, 50),
            "adult" | "adult_income" => (PerturbTarget::Weights, 0.3, 50),
            "gmsc" => (PerturbTarget::Biases, 0.05, 50),
            "default_credit" => (PerturbTarget::Biases, 0.5, 50),
            _ => return None,
        };
        Some(Self {
            layer: 1,
            target,
            sigma,
            count,
            seed,
        })
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self, base: &Mlp) -> Result<()> {
        if self.layer == 0 || self.layer > base.num_layers() {
            return Err(Error::PerturbSpec(format!(
                "layer {} outside 1..={}",
                self.layer,
                base.num_layers()
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::PerturbSpec(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if self.count == 0 {
            return Err(Error::PerturbSpec("count must be at least 1".into()));
        }
        Ok(())
    }
}

/// A trained model together with its noisy variants.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedModel {
    pub base: Mlp,
    pub variants: Vec<Mlp>,
    pub spec: PerturbSpec,
}

/// Draw `spec.count` variants of `base`, each with i.i.d. `N(0, sigma^2)` noise
/// added to the targeted tensor only.
pub fn perturb_model(base: &Mlp, spec: &PerturbSpec) -> Result<PerturbedModel> {
    spec.validate(base)?;
    let l = spec.layer - 1;
    let mut rng = SeededRng::new(spec.seed);
    let variants = (0..spec.count)
        .map(|_| {
            let mut v = base.clone();
            // sigma = 0 keeps the variant bit-identical, including signed zeros.
            if spec.sigma > 0.0 {
                let tensor = match spec.target {
                    PerturbTarget::Weights => v.weights_mut(l),
                    PerturbTarget::Biases => v.biases_mut(l),
                };
                for p in tensor.iter_mut() {
                    *p += spec.sigma * rng.gaussian();
                }
            }
            v
        })
        .collect();
    Ok(PerturbedModel {
        base: base.clone(),
        variants,
        spec: *spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{default_dims, init_mlp};

    fn base() -> Mlp {
        init_mlp(&default_dims(2), &mut SeededRng::new(5)).unwrap()
    }

    fn spec(layer: usize, target: PerturbTarget, sigma: f64, count: usize) -> PerturbSpec {
        PerturbSpec {
            layer,
            target,
            sigma,
            count,
            seed: 77,
        }
    }

    #[test]
    fn zero_sigma_is_identity() {
        let b = base();
        let p = perturb_model(&b, &spec(1, PerturbTarget::Weights, 0.0, 5)).unwrap();
        assert_eq!(p.variants.len(), 5);
        for v in &p.variants {
            assert!(v.params().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn noise_has_the_requested_spread() {
        // 100 variants x 256 first-layer weights = 25600 draws.
        let b = base();
        let p = perturb_model(&b, &spec(1, PerturbTarget::Weights, 0.2, 100)).unwrap();
        let diffs: Vec<f64> = p
            .variants
            .iter()
            .flat_map(|v| v.weights(0).iter().zip(b.weights(0)).map(|(a, c)| a - c))
            .collect();
        assert!(diffs.len() >= 10_000);
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let std = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64).sqrt();
        assert!((std - 0.2).abs() < 0.01, "std {std}");
        assert!(mean.abs() < 0.01);
    }

    #[test]
    fn only_the_targeted_tensor_moves() {
        let b = base();
        let p = perturb_model(&b, &spec(1, PerturbTarget::Biases, 0.3, 3)).unwrap();
        for v in &p.variants {
            for l in 0..b.num_layers() {
                assert_eq!(v.weights(l), b.weights(l));
                if l != 0 {
                    assert_eq!(v.biases(l), b.biases(l));
                }
            }
            assert_ne!(v.biases(0), b.biases(0));
        }
        let p = perturb_model(&b, &spec(3, PerturbTarget::Weights, 0.3, 2)).unwrap();
        for v in &p.variants {
            assert_eq!(v.weights(0), b.weights(0));
            assert_ne!(v.weights(2), b.weights(2));
        }
    }

    #[test]
    fn deterministic_in_the_seed() {
        let b = base();
        let s = spec(1, PerturbTarget::Weights, 0.2, 4);
        assert_eq!(perturb_model(&b, &s).unwrap(), perturb_model(&b, &s).unwrap());
        assert_ne!(
            perturb_model(&b, &s).unwrap().variants,
            perturb_model(&b, &s.with_seed(78)).unwrap().variants
        );
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let b = base();
        for bad in [
            spec(0, PerturbTarget::Weights, 0.1, 1),
            spec(5, PerturbTarget::Weights, 0.1, 1),
            spec(1, PerturbTarget::Weights, -0.1, 1),
            spec(1, PerturbTarget::Weights, 0.1, 0),
        ] {
            assert!(matches!(perturb_model(&b, &bad), Err(Error::PerturbSpec(_))));
        }
    }

    #[test]
    fn presets() {
        let h = PerturbSpec::preset("heloc", 0).unwrap();
        assert_eq!((h.layer, h.target, h.sigma, h.count), (1, PerturbTarget::Weights, 0.2, 100));
        let g = PerturbSpec::preset("gmsc", 0).unwrap();
        assert_eq!((g.target, g.sigma, g.count), (PerturbTarget::Biases, 0.05, 50));
        let d = PerturbSpec::preset("default_credit", 0).unwrap();
        assert_eq!((d.target, d.sigma), (PerturbTarget::Biases, 0.5));
    }
}
