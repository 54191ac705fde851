//! Reverse-mode gradients against central finite differences.

use ndarray::{Array2, Array3};
use onet_core::deeponet::{
    loss_and_grad, loss_value, DeepONet, DeepONetConfig, LossKind, OperatorBatch,
};
use onet_core::nn::{Activation, Conv1d, Dense, Mlp, Params};
use onet_core::oracles::{finite_difference_gradient, gradient_agreement};
use onet_core::rng::seeded;
use rand::Rng;

const H: f64 = 1e-6;
const TOL: f64 = 1e-5;
const FLOOR: f64 = 1e-7;

fn random2(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeded(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn assert_agree(analytic: &[f64], numeric: &[f64], what: &str) {
    let frac = gradient_agreement(analytic, numeric, TOL, FLOOR);
    assert_eq!(frac, 1.0, "{what}: only {:.3} of coordinates agree", frac);
}

fn weighted_sum(y: &Array2<f64>, c: &Array2<f64>) -> f64 {
    (y * c).sum()
}

#[test]
fn dense_layer_all_activations() {
    for (k, act) in [Activation::Relu, Activation::Tanh, Activation::Identity]
        .into_iter()
        .enumerate()
    {
        let layer = Dense::glorot(5, 4, act, &mut seeded(k as u64));
        let x = random2(7, 5, 100 + k as u64);
        let c = random2(7, 4, 200 + k as u64);
        let y = layer.forward_batch(x.view());
        let (g, gx) = layer.backward_batch(x.view(), y.view(), c.clone(), true);
        let numeric =
            finite_difference_gradient(&layer, |l| weighted_sum(&l.forward_batch(x.view()), &c), H);
        assert_agree(&g.flatten(), &numeric, &format!("{act:?} params"));

        let gx = gx.unwrap();
        let mut xp = x.clone();
        for idx in [(0, 0), (3, 2), (6, 4)] {
            let base = xp[idx];
            xp[idx] = base + H;
            let up = weighted_sum(&layer.forward_batch(xp.view()), &c);
            xp[idx] = base - H;
            let down = weighted_sum(&layer.forward_batch(xp.view()), &c);
            xp[idx] = base;
            assert_agree(
                &[gx[idx]],
                &[(up - down) / (2.0 * H)],
                &format!("{act:?} input"),
            );
        }
    }
}

#[test]
fn conv1d_parameters_and_input() {
    let mut rng = seeded(3);
    let conv = Conv1d::glorot(2, 3, 3, 2, &mut rng);
    let x = Array3::from_shape_simple_fn((4, 2, 11), || rng.random_range(-1.0..1.0));
    let y = conv.forward(x.view()).unwrap();
    let c = Array3::from_shape_simple_fn(y.dim(), || rng.random_range(-1.0..1.0));
    let loss = |m: &Conv1d, x: &Array3<f64>| (m.forward(x.view()).unwrap() * &c).sum();
    let (g, gx) = conv.backward(x.view(), c.view());
    let numeric = finite_difference_gradient(&conv, |m| loss(m, &x), H);
    assert_agree(&g.flatten(), &numeric, "conv params");

    let mut xp = x.clone();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for idx in [(0, 0, 0), (1, 1, 5), (3, 0, 10), (2, 1, 7)] {
        let base = xp[idx];
        xp[idx] = base + H;
        let up = loss(&conv, &xp);
        xp[idx] = base - H;
        let down = loss(&conv, &xp);
        xp[idx] = base;
        analytic.push(gx[idx]);
        numeric.push((up - down) / (2.0 * H));
    }
    assert_agree(&analytic, &numeric, "conv input");
}

#[test]
fn mlp_backpropagation() {
    let mlp = Mlp::glorot(
        &[3, 8, 6, 2],
        Activation::Tanh,
        Activation::Identity,
        &mut seeded(9),
    );
    let x = random2(5, 3, 10);
    let c = random2(5, 2, 11);
    let tape = mlp.forward_tape(x.view()).unwrap();
    let (g, _) = mlp.backward(&tape, c.clone(), false);
    let numeric = finite_difference_gradient(
        &mlp,
        |m| weighted_sum(&m.forward_batch(x.view()).unwrap(), &c),
        H,
    );
    assert_agree(&g.flatten(), &numeric, "mlp");
}

#[test]
fn both_losses_against_prediction() {
    let target = random2(4, 6, 20) + 0.5;
    let pred = random2(4, 6, 21);
    for kind in [LossKind::Mse, LossKind::MeanL2Relative] {
        let (_, g) = loss_and_grad(kind, pred.view(), target.view()).unwrap();
        let mut p = pred.clone();
        let mut numeric = Vec::new();
        for idx in 0..p.len() {
            let (r, c) = (idx / 6, idx % 6);
            let base = p[[r, c]];
            p[[r, c]] = base + H;
            let up = loss_value(kind, p.view(), target.view()).unwrap();
            p[[r, c]] = base - H;
            let down = loss_value(kind, p.view(), target.view()).unwrap();
            p[[r, c]] = base;
            numeric.push((up - down) / (2.0 * H));
        }
        assert_agree(g.as_slice().unwrap(), &numeric, &format!("{kind:?}"));
    }
}

fn check_deeponet(config: DeepONetConfig, batch: &OperatorBatch, seed: u64) {
    let mut model = DeepONet::new(config, &mut seeded(seed)).unwrap();
    if !model.bias.is_empty() {
        model.bias[0] = 0.3;
    }
    for kind in [LossKind::Mse, LossKind::MeanL2Relative] {
        let (_, grads) = model.loss_and_gradients(batch, kind).unwrap();
        let numeric = finite_difference_gradient(
            &model,
            |m| {
                loss_value(
                    kind,
                    m.predict_batch(batch).unwrap().view(),
                    batch.targets.view(),
                )
                .unwrap()
            },
            H,
        );
        assert_agree(
            &grads.flatten(),
            &numeric,
            &format!("deeponet {kind:?} stacked={}", model.config.stacked),
        );
    }
}

fn small_config(stacked: bool, bias: bool) -> DeepONetConfig {
    DeepONetConfig {
        branch: vec![6, 7, 4],
        trunk: vec![2, 5, 4],
        activation: Activation::Tanh,
        trunk_output_activation: Activation::Tanh,
        stacked,
        output_bias: bias,
    }
}

#[test]
fn deeponet_aligned_batches() {
    let batch = OperatorBatch {
        inputs: random2(3, 6, 30),
        points: random2(5, 2, 31),
        pair_index: None,
        targets: random2(3, 5, 32) + 1.0,
    };
    check_deeponet(small_config(false, false), &batch, 1);
    check_deeponet(small_config(true, true), &batch, 2);
}

#[test]
fn deeponet_unaligned_batches_with_relu() {
    let pair_index = Array2::from_shape_fn((3, 4), |(i, q)| (i * 3 + q * 2) % 6);
    let batch = OperatorBatch {
        inputs: random2(3, 6, 40),
        points: random2(6, 2, 41),
        pair_index: Some(pair_index),
        targets: random2(3, 4, 42) - 1.0,
    };
    let mut cfg = small_config(false, true);
    cfg.activation = Activation::Relu;
    cfg.trunk_output_activation = Activation::Relu;
    check_deeponet(cfg, &batch, 3);
}
