use modeset::explain::{attribute, saliency, smoothgrad, ExplainMethod, Predictor, PredictorKind};
use modeset::nn::{init_mlp, Mlp};
use modeset::rng::SeededRng;

fn models(dims: &[usize], count: usize, seed: u64) -> Vec<Mlp> {
    let mut rng = SeededRng::new(seed);
    (0..count).map(|_| init_mlp(dims, &mut rng).unwrap()).collect()
}

#[test]
fn ensemble_saliency_is_gradient_of_mean_probability() {
    let dims = [4, 32, 16, 2];
    let p = Predictor::new(PredictorKind::AverageEnsemble, models(&dims, 5, 3)).unwrap();
    let mut rng = SeededRng::new(4);
    let h = 1e-5;
    for id in 0..20 {
        let x: Vec<f64> = (0..4).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        let e = saliency(&p, &x, id).unwrap();
        for j in 0..4 {
            let at = |delta: f64| {
                let mut xp = x.clone();
                xp[j] += delta;
                p.mean_probabilities(&xp).unwrap()[1]
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            let err = (e.values[j] - numeric).abs();
            assert!(err <= 1e-8 || err / numeric.abs().max(e.values[j].abs()) <= 1e-4);
        }
    }
}

#[test]
fn majority_is_explained_by_mean_constituent_saliency() {
    let members = models(&[3, 8, 2], 4, 9);
    let avg = Predictor::new(PredictorKind::AverageEnsemble, members.clone()).unwrap();
    let maj = Predictor::new(PredictorKind::MajorityEnsemble, members).unwrap();
    let x = [0.3, -1.2, 0.7];
    let mut rng = SeededRng::new(0);
    assert!(saliency(&maj, &x, 0).is_err());
    let a = attribute(&maj, &ExplainMethod::Saliency, &x, 0, &mut rng).unwrap();
    assert_eq!(a.values, saliency(&avg, &x, 0).unwrap().values);
}

/// Expected gradient under Gaussian input noise by tensor-product midpoint
/// quadrature over +-6 sigma, with the per-coordinate variance for a Monte
/// Carlo tolerance.
fn noisy_gradient_moments(model: &Mlp, x: &[f64; 2], sigma: f64) -> ([f64; 2], [f64; 2]) {
    let n = 600;
    let span = 12.0 * sigma;
    let step = span / n as f64;
    let (mut mean, mut sq, mut mass) = ([0.0; 2], [0.0; 2], 0.0);
    for i in 0..n {
        let u = -6.0 * sigma + (i as f64 + 0.5) * step;
        for j in 0..n {
            let v = -6.0 * sigma + (j as f64 + 0.5) * step;
            let w = (-(u * u + v * v) / (2.0 * sigma * sigma)).exp();
            let g = model.input_gradient(&[x[0] + u, x[1] + v], 1).unwrap();
            for c in 0..2 {
                mean[c] += w * g[c];
                sq[c] += w * g[c] * g[c];
            }
            mass += w;
        }
    }
    let mean = [mean[0] / mass, mean[1] / mass];
    let var = [sq[0] / mass - mean[0] * mean[0], sq[1] / mass - mean[1] * mean[1]];
    (mean, var)
}

#[test]
fn smoothgrad_converges_to_expected_noisy_gradient() {
    let model = models(&[2, 12, 2], 1, 21).pop().unwrap();
    let p = Predictor::single(model.clone()).unwrap();
    let x = [0.4, -0.3];
    let sigma = 0.5;
    let samples = 20_000;
    let (mean, var) = noisy_gradient_moments(&model, &x, sigma);
    let e = smoothgrad(&p, &x, sigma, samples, &mut SeededRng::new(77), 0).unwrap();
    for c in 0..2 {
        let tol = 5.0 * (var[c] / samples as f64).sqrt() + 1e-9;
        assert!((e.values[c] - mean[c]).abs() <= tol, "coordinate {c}: {} vs {} (tol {tol})", e.values[c], mean[c]);
    }
}

#[test]
fn smoothgrad_with_zero_noise_is_saliency() {
    let members = models(&[5, 16, 2], 3, 5);
    let x = [0.1, 0.2, -0.3, 0.4, -0.5];
    for kind in [PredictorKind::AverageEnsemble, PredictorKind::Perturbed, PredictorKind::CurveSampled] {
        let p = Predictor::new(kind, members.clone()).unwrap();
        let s = smoothgrad(&p, &x, 0.0, 50, &mut SeededRng::new(1), 2).unwrap();
        assert_eq!(s.values, saliency(&p, &x, 2).unwrap().values);
    }
}
