//! Finite-difference gradient checking shared by test targets.

use fmsense_core::nn::loss::{bce_grad, bce_with_logits};
use fmsense_core::nn::{ConvSpec, ModelSpec, Network};
use ndarray::{Array1, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
const REL_FLOOR: f64 = 1e-6;

pub struct GradOutcome {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_err: f64,
    pub layer_names: Vec<&'static str>,
}

fn loss(net: &mut Network, x: &Array3<f64>, y: &[f64], seed: u64) -> (f64, Vec<Array3<bool>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = net.forward_train(x.clone(), &mut rng).unwrap();
    let l = z.iter().zip(y).map(|(z, y)| bce_with_logits(*z, *y)).sum::<f64>() / y.len() as f64;
    (l, net.relu_masks())
}

fn random_spec(rng: &mut ChaCha8Rng) -> ModelSpec {
    let n_conv = rng.random_range(1..=3);
    let conv = (0..n_conv)
        .map(|_| ConvSpec::new(rng.random_range(1..=3), [1, 3, 5][rng.random_range(0..3)]))
        .collect();
    let mut spec = ModelSpec::new(conv, rng.random_range(2..=5), (rng.random_range(4..=8), rng.random_range(1..=3)));
    spec.dropout_rate = [0.0, 0.2][rng.random_range(0..2)];
    spec
}

fn rel_err(numeric: f64, exact: f64) -> f64 {
    (numeric - exact).abs() / numeric.abs().max(exact.abs()).max(REL_FLOOR)
}

/// Checks every parameter and input gradient of one random micro-network.
/// Perturbations that change any ReLU activation pattern are skipped.
pub fn check_network(case: u64) -> GradOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + case);
    let spec = random_spec(&mut rng);
    let batch = rng.random_range(2..=4);
    let (t, c) = spec.input_shape;
    let x = Array3::from_shape_fn((batch, t, c), |_| rng.random_range(-1.5..1.5));
    let mut y: Vec<f64> = (0..batch).map(|_| rng.random_range(0..2) as f64).collect();
    y[0] = 1.0 - y[batch - 1];
    let mut net = Network::new(&spec, &mut rng).unwrap();
    let dropout_seed = case;

    let mut fwd_rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    let z = net.forward_train(x.clone(), &mut fwd_rng).unwrap();
    let masks = net.relu_masks();
    let dz: Array1<f64> = z.iter().zip(&y).map(|(z, y)| bce_grad(*z, *y) / batch as f64).collect();
    let dx = net.backward(&dz);
    let analytic: Vec<Vec<f64>> = net.params_and_grads().into_iter().map(|(_, g)| g.to_vec()).collect();

    let mut out = GradOutcome {
        checked: 0,
        skipped: 0,
        max_rel_err: 0.0,
        layer_names: net.layers.iter().map(|l| l.name()).collect(),
    };
    for (ti, grads) in analytic.iter().enumerate() {
        for (pi, &g) in grads.iter().enumerate() {
            let orig = net.params_mut()[ti][pi];
            net.params_mut()[ti][pi] = orig + H;
            let (lp, mp) = loss(&mut net, &x, &y, dropout_seed);
            net.params_mut()[ti][pi] = orig - H;
            let (lm, mm) = loss(&mut net, &x, &y, dropout_seed);
            net.params_mut()[ti][pi] = orig;
            if mp != masks || mm != masks {
                out.skipped += 1;
                continue;
            }
            out.max_rel_err = out.max_rel_err.max(rel_err((lp - lm) / (2.0 * H), g));
            out.checked += 1;
        }
    }
    for idx in ndarray::indices(x.dim()) {
        let mut xp = x.clone();
        xp[idx] += H;
        let (lp, mp) = loss(&mut net, &xp, &y, dropout_seed);
        xp[idx] -= 2.0 * H;
        let (lm, mm) = loss(&mut net, &xp, &y, dropout_seed);
        if mp != masks || mm != masks {
            out.skipped += 1;
            continue;
        }
        out.max_rel_err = out.max_rel_err.max(rel_err((lp - lm) / (2.0 * H), dx[idx]));
        out.checked += 1;
    }
    out
}
