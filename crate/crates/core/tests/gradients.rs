//! Analytic gradients against central finite differences.

use modeset::landscape::{bezier_point, curve_gradients, CurveParams};
use modeset::nn::{default_dims, init_mlp, Batch, Mlp};
use modeset::rng::SeededRng;

const H: f64 = 1e-5;
const REL: f64 = 1e-4;
const ABS: f64 = 1e-8;

fn close(analytic: f64, numeric: f64) -> bool {
    let err = (analytic - numeric).abs();
    err <= ABS || err / analytic.abs().max(numeric.abs()) <= REL
}

fn central(f: impl Fn(f64) -> f64) -> f64 {
    (f(H) - f(-H)) / (2.0 * H)
}

fn random_input(d: usize, rng: &mut SeededRng) -> Vec<f64> {
    (0..d).map(|_| rng.uniform_range(-2.0, 2.0)).collect()
}

fn random_batch(d: usize, n: usize, rng: &mut SeededRng) -> (Vec<f64>, Vec<u8>) {
    let x = (0..n * d).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
    let y = (0..n).map(|_| (rng.below(2)) as u8).collect();
    (x, y)
}

fn with_param(model: &Mlp, layer: usize, bias: bool, idx: usize, delta: f64) -> Mlp {
    let mut m = model.clone();
    if bias {
        m.biases_mut(layer)[idx] += delta;
    } else {
        m.weights_mut(layer)[idx] += delta;
    }
    m
}

#[test]
fn input_gradient_matches_finite_differences() {
    let mut rng = SeededRng::new(11);
    for case in 0..40 {
        let d = 2 + case % 7;
        let model = init_mlp(&default_dims(d), &mut rng).unwrap();
        let x = random_input(d, &mut rng);
        for class in 0..2 {
            let g = model.input_gradient(&x, class).unwrap();
            for j in 0..d {
                let numeric = central(|h| {
                    let mut xp = x.clone();
                    xp[j] += h;
                    model.forward(&xp).unwrap()[class]
                });
                assert!(close(g[j], numeric), "case {case} class {class} feature {j}: {} vs {numeric}", g[j]);
            }
        }
    }
}

#[test]
fn parameter_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(12);
    for case in 0..30 {
        let d = 2 + case % 5;
        let model = init_mlp(&default_dims(d), &mut rng).unwrap();
        let (x, y) = random_batch(d, 6, &mut rng);
        let batch = Batch::new(&x, &y, d).unwrap();
        let grads = model.loss_and_param_grads(&batch).unwrap();
        assert!((grads.loss - model.loss(&batch).unwrap()).abs() < 1e-12);
        for layer in 0..model.num_layers() {
            for bias in [false, true] {
                let analytic = if bias { &grads.d_biases[layer] } else { &grads.d_weights[layer] };
                for _ in 0..4 {
                    let idx = rng.below(analytic.len());
                    let numeric = central(|h| with_param(&model, layer, bias, idx, h).loss(&batch).unwrap());
                    assert!(
                        close(analytic[idx], numeric),
                        "case {case} layer {layer} bias {bias} idx {idx}: {} vs {numeric}",
                        analytic[idx]
                    );
                }
            }
        }
    }
}

#[test]
fn curve_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(13);
    let dims = vec![3, 16, 8, 2];
    for case in 0..20 {
        let w1 = init_mlp(&dims, &mut rng).unwrap();
        let theta = init_mlp(&dims, &mut rng).unwrap();
        let w2 = init_mlp(&dims, &mut rng).unwrap();
        let curve = CurveParams::new(w1, theta, w2, true).unwrap();
        let t = rng.uniform();
        let (x, y) = random_batch(3, 5, &mut rng);
        let batch = Batch::new(&x, &y, 3).unwrap();
        let g = curve_gradients(&curve, &batch, t).unwrap();
        for which in 0..3 {
            let analytic = [&g.d_w1, &g.d_theta, &g.d_w2][which];
            for layer in 0..3 {
                let idx = rng.below(analytic.d_weights[layer].len());
                let numeric = central(|h| {
                    let mut c = curve.clone();
                    let target = [&mut c.w1, &mut c.theta, &mut c.w2][which].weights_mut(layer);
                    target[idx] += h;
                    bezier_point(&c, t).unwrap().loss(&batch).unwrap()
                });
                let a = analytic.d_weights[layer][idx];
                assert!(close(a, numeric), "case {case} point {which} layer {layer}: {a} vs {numeric}");
            }
        }
    }
}
