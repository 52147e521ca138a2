mod common;

use common::*;
use fcresnet_admm::baselines::*;
use fcresnet_admm::linalg::Matrix;
use fcresnet_admm::model::{objective, Activation, Dataset, Init, NetworkShape};
use proptest::prelude::*;

fn flat_fd(weights: &[Matrix], f: impl Fn(&[Matrix]) -> f64, h: f64) -> Vec<Matrix> {
    (0..weights.len())
        .map(|j| {
            fd_grad(
                |m| {
                    let mut w = weights.to_vec();
                    w[j] = m.clone();
                    f(&w)
                },
                &weights[j],
                h,
            )
        })
        .collect()
}

fn stacked_rel_err(a: &[Matrix], b: &[Matrix]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| x.dist_sq(y).unwrap()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(Matrix::frob_sq).sum::<f64>().sqrt();
    num / den.max(1.0)
}

#[test]
fn zero_data_gives_lambda_w() {
    let shape = NetworkShape::uniform(3, 2, 1, Activation::Sin).unwrap();
    let w = Init::KaimingNormal.weights(&shape, 4);
    let g = backprop(&w, &shape, &Matrix::zeros(2, 5), &Matrix::zeros(1, 5), 0.3).unwrap();
    for (gi, wi) in g.iter().zip(&w) {
        assert!(gi.max_abs_diff(&wi.scale(0.3)).unwrap() < 1e-15);
    }
}

#[test]
fn scalar_two_layer_chain_rule() {
    let shape = NetworkShape::uniform(2, 1, 1, Activation::Sin).unwrap();
    let (a, b, x, y, lam) = (0.3f64, 2.0f64, 0.5f64, 1.0f64, 0.1f64);
    let v1 = x + (a * x).sin();
    let r = b * v1 - y;
    let want_b = r * v1 + lam * b;
    let want_a = r * b * (a * x).cos() * x + lam * a;
    let g = backprop(&[s(a), s(b)], &shape, &s(x), &s(y), lam).unwrap();
    assert!((g[0].get(0, 0) - want_a).abs() < 1e-14);
    assert!((g[1].get(0, 0) - want_b).abs() < 1e-14);
}

#[test]
fn backprop_matches_finite_differences() {
    for act in smooth_acts() {
        for (nl, d, q) in [(2, 1, 1), (3, 2, 1), (4, 3, 2)] {
            let (shape, data, _) = tiny(nl, d, q, 5, act, 30 + nl as u64);
            let mut r = rng(nl as u64);
            let w: Vec<Matrix> = (1..=nl)
                .map(|i| {
                    let (a, b) = shape.weight_shape(i);
                    rand_matrix(&mut r, a, b, 0.8)
                })
                .collect();
            let lam = 0.05;
            let g = backprop(&w, &shape, &data.x, &data.y, lam).unwrap();
            let fd = flat_fd(&w, |w| objective(w, &shape, &data.x, &data.y, lam).unwrap(), 1e-6);
            let err = stacked_rel_err(&g, &fd);
            assert!(err <= 1e-5, "{act} N={nl}: {err}");
        }
    }
}

#[test]
fn training_grad_matches_training_loss() {
    let (shape, data, w) = tiny(3, 2, 1, 7, Activation::Tanh, 12);
    let g = training_grad(&w, &shape, &data, 0.01).unwrap();
    let fd = flat_fd(&w, |w| training_loss(w, &shape, &data, 0.01).unwrap(), 1e-6);
    assert!(stacked_rel_err(&g, &fd) <= 1e-6);
}

fn one_weight(v: f64) -> Vec<Matrix> {
    vec![s(v)]
}

#[test]
fn zero_gradient_leaves_weights() {
    for kind in [OptimizerKind::Sgd, OptimizerKind::Sgdm, OptimizerKind::Adam] {
        let cfg = OptimizerConfig::preset(kind);
        let mut w = vec![s(1.5), Matrix::filled(2, 2, -0.5)];
        let g = vec![s(0.0), Matrix::zeros(2, 2)];
        let mut st = OptState::new(&w);
        for _ in 0..3 {
            step(&mut w, &g, &mut st, &cfg).unwrap();
        }
        assert_eq!(w, vec![s(1.5), Matrix::filled(2, 2, -0.5)], "{kind}");
    }
}

#[test]
fn sgd_step_example() {
    let mut cfg = OptimizerConfig::preset(OptimizerKind::Sgd);
    cfg.lr = 0.1;
    let mut w = one_weight(1.0);
    let mut st = OptState::new(&w);
    step_sgd(&mut w, &one_weight(1.0), &mut st, &cfg).unwrap();
    assert!((w[0].get(0, 0) - 0.9).abs() < 1e-15);
}

#[test]
fn sgdm_velocity_recursion() {
    let mut cfg = OptimizerConfig::preset(OptimizerKind::Sgdm);
    cfg.lr = 0.1;
    cfg.momentum = 0.5;
    let mut w = one_weight(0.0);
    let mut st = OptState::new(&w);
    // v: 1, 1.5, 1.75; w: −0.1, −0.25, −0.425.
    for want in [-0.1, -0.25, -0.425] {
        step_sgdm(&mut w, &one_weight(1.0), &mut st, &cfg).unwrap();
        assert!((w[0].get(0, 0) - want).abs() < 1e-15);
    }
}

#[test]
fn adam_first_step_is_about_lr() {
    let cfg = OptimizerConfig::preset(OptimizerKind::Adam);
    let mut w = one_weight(0.0);
    let mut st = OptState::new(&w);
    step_adam(&mut w, &one_weight(1.0), &mut st, &cfg).unwrap();
    let want = -cfg.lr / (1.0 + cfg.eps);
    assert!((w[0].get(0, 0) - want).abs() < 1e-15);
    // The direction is scale free at t=1.
    let mut w2 = one_weight(0.0);
    let mut st2 = OptState::new(&w2);
    step_adam(&mut w2, &one_weight(250.0), &mut st2, &cfg).unwrap();
    assert!((w2[0].get(0, 0) + cfg.lr).abs() < 1e-10);
}

#[test]
fn adam_second_step_by_hand() {
    let mut cfg = OptimizerConfig::preset(OptimizerKind::Adam);
    cfg.lr = 0.5;
    let mut w = one_weight(0.0);
    let mut st = OptState::new(&w);
    step_adam(&mut w, &one_weight(1.0), &mut st, &cfg).unwrap();
    step_adam(&mut w, &one_weight(-2.0), &mut st, &cfg).unwrap();
    let (b1, b2, e) = (cfg.beta1, cfg.beta2, cfg.eps);
    let m = b1 * (1.0 - b1) + (1.0 - b1) * -2.0;
    let v = b2 * (1.0 - b2) + (1.0 - b2) * 4.0;
    let step2 = (m / (1.0 - b1 * b1)) / ((v / (1.0 - b2 * b2)).sqrt() + e);
    let want = -0.5 / (1.0 + e) - 0.5 * step2;
    assert!((w[0].get(0, 0) - want).abs() < 1e-14);
}

fn toy_problem() -> (NetworkShape, Dataset) {
    // Targets are a linear map of the inputs, so a small-weight residual net fits them.
    let shape = NetworkShape::uniform(3, 2, 1, Activation::Tanh).unwrap();
    let mut r = rng(9);
    let x = rand_matrix(&mut r, 2, 200, 1.0);
    let y = Matrix::from_fn(1, 200, |_, j| 0.7 * x.get(0, j) - 0.4 * x.get(1, j));
    (shape, Dataset::new(x, y).unwrap())
}

#[test]
fn training_is_seed_deterministic() {
    let (shape, data) = toy_problem();
    for kind in [OptimizerKind::Sgd, OptimizerKind::Sgdm, OptimizerKind::Adam] {
        let cfg = OptimizerConfig::preset(kind);
        let a = train_baseline(&shape, &data, &cfg, &Init::KaimingNormal, 3, 5).unwrap();
        let b = train_baseline(&shape, &data, &cfg, &Init::KaimingNormal, 3, 5).unwrap();
        assert_eq!(a.weights, b.weights);
        let strip = |r: &BaselineRun| r.trace.iter().map(|t| (t.k, t.aux_lag.to_bits())).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        let c = train_baseline(&shape, &data, &cfg, &Init::KaimingNormal, 3, 6).unwrap();
        assert_ne!(a.weights, c.weights);
    }
}

#[test]
fn loss_decreases_on_linear_targets() {
    let (shape, data) = toy_problem();
    for kind in [OptimizerKind::Sgd, OptimizerKind::Sgdm, OptimizerKind::Adam] {
        let mut cfg = OptimizerConfig::preset(kind);
        cfg.lr_decay = 1.0;
        cfg.batch_size = 16;
        let w0 = Init::KaimingNormal.weights(&shape, 1);
        let start = training_loss(&w0, &shape, &data, 0.0).unwrap();
        let run = train_baseline_from(&shape, &data, &cfg, w0, 30, 1).unwrap();
        let end = run.trace.last().unwrap().aux_lag;
        assert!(end < 0.2 * start, "{kind}: {start} -> {end}");
        assert!(run.trace.iter().all(|t| t.objective.is_finite() && t.grad_lag.is_finite()));
    }
}

#[test]
fn updates_per_epoch_round_up() {
    let (shape, data) = toy_problem();
    let mut cfg = OptimizerConfig::preset(OptimizerKind::Sgd);
    cfg.batch_size = 64;
    let run = train_baseline(&shape, &data, &cfg, &Init::KaimingNormal, 2, 0).unwrap();
    assert_eq!(run.updates, 2 * 4);
    assert_eq!(run.trace.len(), 2);
    assert_eq!(run.trace.iter().map(|t| t.k).collect::<Vec<_>>(), vec![1, 2]);
}

#[test]
fn sgdm_without_momentum_is_sgd() {
    let (shape, data) = toy_problem();
    let mut sgd = OptimizerConfig::preset(OptimizerKind::Sgd);
    sgd.lr_decay = 1.0;
    let mut sgdm = sgd.clone();
    sgdm.kind = OptimizerKind::Sgdm;
    sgdm.momentum = 0.0;
    let a = train_baseline(&shape, &data, &sgd, &Init::KaimingNormal, 4, 2).unwrap();
    let b = train_baseline(&shape, &data, &sgdm, &Init::KaimingNormal, 4, 2).unwrap();
    assert_eq!(a.weights, b.weights);
}

#[test]
fn rejects_invalid_config() {
    let (shape, data) = toy_problem();
    let mut cfg = OptimizerConfig::preset(OptimizerKind::Sgd);
    cfg.batch_size = 0;
    assert!(train_baseline(&shape, &data, &cfg, &Init::KaimingNormal, 1, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sgdm_zero_momentum_equals_sgd_per_step(w in -5.0f64..5.0, g in -5.0f64..5.0, lr in 1e-4f64..1.0) {
        let mut cfg = OptimizerConfig::preset(OptimizerKind::Sgd);
        cfg.lr = lr;
        cfg.momentum = 0.0;
        let (mut a, mut b) = (one_weight(w), one_weight(w));
        let (mut sa, mut sb) = (OptState::new(&a), OptState::new(&b));
        for _ in 0..3 {
            step_sgd(&mut a, &one_weight(g), &mut sa, &cfg).unwrap();
            step_sgdm(&mut b, &one_weight(g), &mut sb, &cfg).unwrap();
        }
        prop_assert_eq!(a, b);
    }

    #[test]
    fn adam_step_is_bounded_by_lr(g in prop::collection::vec(-100.0f64..100.0, 1..6)) {
        let cfg = OptimizerConfig::preset(OptimizerKind::Adam);
        let mut w = one_weight(0.0);
        let mut st = OptState::new(&w);
        let mut prev = 0.0;
        for gi in g {
            step_adam(&mut w, &one_weight(gi), &mut st, &cfg).unwrap();
            let now = w[0].get(0, 0);
            // Adam steps stay within a small multiple of lr whatever the gradient scale.
            prop_assert!((now - prev).abs() <= cfg.lr * 3.2);
            prev = now;
        }
    }

    #[test]
    fn backprop_is_linear_in_lambda(lam in 0.0f64..2.0, seed in 0u64..50) {
        let (shape, data, w) = tiny(3, 2, 1, 4, Activation::Sigmoid, seed);
        let g0 = backprop(&w, &shape, &data.x, &data.y, 0.0).unwrap();
        let g = backprop(&w, &shape, &data.x, &data.y, lam).unwrap();
        for ((a, b), wi) in g.iter().zip(&g0).zip(&w) {
            prop_assert!(a.max_abs_diff(&b.add(&wi.scale(lam)).unwrap()).unwrap() < 1e-12);
        }
    }
}
