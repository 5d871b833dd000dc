//! Finite-difference, closed-form, and identity checks of the numeric core.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use levelchain::nn::{kl_divergence, Activation, AdamConfig, AdamState, DenseNet, Gradients, OutputGrad, Schedule};
use levelchain::vae::vae_step;

const STEP: f64 = 1e-6;
const REL_TOL: f64 = 1e-4;
/// Below this magnitude the absolute difference is judged instead.
const ABS_FLOOR: f64 = 1e-7;

fn random_net(rng: &mut ChaCha8Rng, sizes: &[usize], last: Activation) -> DenseNet<f64> {
    let mut acts = vec![Activation::Relu; sizes.len() - 2];
    acts.push(last);
    let mut net = DenseNet::<f64>::init(sizes, &acts, rng).unwrap();
    // Non-zero biases so ReLU kinks are not all at the origin.
    for layer in net.layers_mut() {
        layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    net
}

fn close(analytic: f64, numeric: f64) -> bool {
    let scale = analytic.abs().max(numeric.abs());
    scale < ABS_FLOOR || (analytic - numeric).abs() / scale <= REL_TOL
}

/// Central differences of `loss` with respect to every parameter of `net`,
/// compared against `grads`. Returns the number of mismatches.
fn check_params(net: &mut DenseNet<f64>, grads: &Gradients<f64>, loss: &dyn Fn(&DenseNet<f64>) -> f64) -> usize {
    let mut bad = 0;
    for k in 0..net.layers().len() {
        let (rows, cols) = net.layers()[k].weight.dim();
        for idx in (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))) {
            let orig = net.layers()[k].weight[idx];
            net.layers_mut()[k].weight[idx] = orig + STEP;
            let up = loss(net);
            net.layers_mut()[k].weight[idx] = orig - STEP;
            let down = loss(net);
            net.layers_mut()[k].weight[idx] = orig;
            if !close(grads.layers[k].0[idx], (up - down) / (2.0 * STEP)) {
                bad += 1;
            }
        }
        for j in 0..rows {
            let orig = net.layers()[k].bias[j];
            net.layers_mut()[k].bias[j] = orig + STEP;
            let up = loss(net);
            net.layers_mut()[k].bias[j] = orig - STEP;
            let down = loss(net);
            net.layers_mut()[k].bias[j] = orig;
            if !close(grads.layers[k].1[j], (up - down) / (2.0 * STEP)) {
                bad += 1;
            }
        }
    }
    bad
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(lo..hi))
}

#[test]
fn dense_gradients_match_central_differences_on_fifty_nets() {
    let mut failures = Vec::new();
    for trial in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let depth = rng.random_range(1..=3);
        let mut sizes = vec![rng.random_range(2..=6)];
        for _ in 0..depth {
            sizes.push(rng.random_range(2..=6));
        }
        let last = [Activation::None, Activation::Sigmoid, Activation::Relu][trial as usize % 3];
        let mut net = random_net(&mut rng, &sizes, last);
        let batch = rng.random_range(1..=4);
        let x = random_matrix(&mut rng, batch, sizes[0], -1.0, 1.0);
        // Loss = sum(c .* output) for random coefficients c.
        let c = random_matrix(&mut rng, batch, *sizes.last().unwrap(), -1.0, 1.0);
        let loss = |n: &DenseNet<f64>| (&n.infer(x.view()).unwrap() * &c).sum();
        let (_, cache) = net.forward(x.view()).unwrap();
        let grads = net.backward(&cache, OutputGrad::Output(c.view())).unwrap();
        let bad = check_params(&mut net, &grads, &loss);
        if bad > 0 {
            failures.push((trial, bad));
        }
    }
    assert!(failures.is_empty(), "trials with mismatched gradients: {failures:?}");
}

fn vae_objective(
    enc: &DenseNet<f64>,
    dec: &DenseNet<f64>,
    x: ArrayView2<f64>,
    t: ArrayView2<f64>,
    noise: ArrayView2<f64>,
    w: f64,
) -> f64 {
    // Written out independently of the library's loss helpers.
    let latent = dec.input_size();
    let b = x.nrows() as f64;
    let h = enc.infer(x).unwrap();
    let mut total = 0.0;
    let mut z = Array2::<f64>::zeros((x.nrows(), latent));
    for r in 0..x.nrows() {
        for j in 0..latent {
            let (m, lv) = (h[(r, j)], h[(r, latent + j)]);
            z[(r, j)] = m + (0.5 * lv).exp() * noise[(r, j)];
            total += w * 0.5 * (lv.exp() + m * m - 1.0 - lv);
        }
    }
    let p = dec.infer(z.view()).unwrap();
    for (pv, tv) in p.iter().zip(t.iter()) {
        total -= tv * pv.ln() + (1.0 - tv) * (1.0 - pv).ln();
    }
    total / b
}

#[test]
fn vae_step_gradients_match_central_differences() {
    for trial in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(77 + trial);
        let (d, hidden, latent, batch) = (6, 5, 3, 3);
        let mut enc = random_net(&mut rng, &[d, hidden, 2 * latent], Activation::None);
        let mut dec = random_net(&mut rng, &[latent, hidden, d], Activation::Sigmoid);
        let x = random_matrix(&mut rng, batch, d, 0.0, 1.0).mapv(f64::round);
        let t = random_matrix(&mut rng, batch, d, 0.0, 1.0).mapv(f64::round);
        let noise = random_matrix(&mut rng, batch, latent, -1.5, 1.5);
        let w = rng.random_range(0.0..1.0);
        let out = vae_step(&enc, &dec, x.view(), t.view(), noise.view(), w).unwrap();
        let reported = (out.recon + w * out.kl) / batch as f64;
        let direct = vae_objective(&enc, &dec, x.view(), t.view(), noise.view(), w);
        assert!((reported - direct).abs() < 1e-9 * direct.abs().max(1.0));

        let dec_fixed = dec.clone();
        let bad_enc = check_params(&mut enc, &out.encoder_grads, &|e| {
            vae_objective(e, &dec_fixed, x.view(), t.view(), noise.view(), w)
        });
        let enc_fixed = enc.clone();
        let bad_dec = check_params(&mut dec, &out.decoder_grads, &|dn| {
            vae_objective(&enc_fixed, dn, x.view(), t.view(), noise.view(), w)
        });
        assert_eq!((bad_enc, bad_dec), (0, 0), "trial {trial}");
    }
}

#[test]
fn kl_closed_form_spot_checks() {
    assert!(kl_divergence(&[0.0f64; 16], &[0.0f64; 16]).unwrap().abs() <= 1e-9);
    assert!((kl_divergence(&[1.0f64], &[0.0f64]).unwrap() - 0.5).abs() <= 1e-9);
    // 0.5 (e^1 + 0 - 1 - 1) for a unit log-variance.
    let expected = 0.5 * (1f64.exp() - 2.0);
    assert!((kl_divergence(&[0.0f64], &[1.0f64]).unwrap() - expected).abs() <= 1e-9);
}

#[test]
fn adam_zero_gradients_are_identity_for_a_thousand_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = random_net(&mut rng, &[4, 6, 3], Activation::Sigmoid);
    let before = net.clone();
    let mut adam = AdamState::new(&net, AdamConfig::default());
    let zeros = Gradients::zeros_like(&net, 1);
    for _ in 0..1000 {
        adam.step(&mut net, &zeros, 1e-3).unwrap();
    }
    assert_eq!(adam.steps(), 1000);
    assert_eq!(net, before);
}

#[test]
fn paper_schedule_trace_matches_closed_form() {
    let s = Schedule::paper();
    // Learning rates for the four 2500-epoch blocks, as decimal literals.
    let table = [1e-3, 1e-4, 1e-5, 1e-6];
    for epoch in 0..10_000 {
        let (lr, w) = s.at(epoch).unwrap();
        assert_eq!(lr, 0.001 * 0.1f64.powi((epoch / 2500) as i32), "lr at {epoch}");
        assert!((lr - table[epoch / 2500]).abs() <= 1e-15 * table[epoch / 2500], "lr at {epoch}");
        let ramp = if epoch >= 2500 { 1.0 } else { epoch as f64 / 2500.0 };
        assert_eq!(w, ramp, "kl weight at {epoch}");
    }
    assert!(s.at(10_000).is_err());
}
