//! Gradient-trained baselines: reverse-mode gradients of the network objective
//! and SGD, SGD with momentum and Adam.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{b2_ratio, TraceRecord};
use crate::linalg::{flops, Matrix};
use crate::model::{mse, predict, Dataset, Init, NetworkShape};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Sgdm,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Sgdm => "sgdm",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "sgdm" => Ok(OptimizerKind::Sgdm),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::Parse(format!("unknown optimizer '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub batch_size: usize,
    /// Weight of (1/2)Σ‖Wᵢ‖² in the training loss.
    pub l2: f64,
}

impl OptimizerConfig {
    /// lr 0.01, momentum 0.7, decay 0.9, batch 64, Adam (0.9, 0.999, 1e-8).
    pub fn preset(kind: OptimizerKind) -> Self {
        Self {
            kind,
            lr: 0.01,
            momentum: if kind == OptimizerKind::Sgdm { 0.7 } else { 0.0 },
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr_decay: 0.9,
            batch_size: 64,
            l2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyper(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("adam betas must lie in [0, 1), got ({}, {})", self.beta1, self.beta2));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be nonnegative, got {}", self.l2));
        }
        Ok(())
    }
}

/// Gradient of ½‖V_N − Y‖² + (λ/2)Σ‖Wᵢ‖² with respect to W₁..W_N.
pub fn backprop(weights: &[Matrix], shape: &NetworkShape, x: &Matrix, y: &Matrix, lambda: f64) -> Result<Vec<Matrix>> {
    backprop_scaled(weights, shape, x, y, 1.0, lambda)
}

/// Gradient of (s/2)‖V_N − Y‖² + (λ/2)Σ‖Wᵢ‖².
pub fn backprop_scaled(
    weights: &[Matrix],
    shape: &NetworkShape,
    x: &Matrix,
    y: &Matrix,
    s: f64,
    lambda: f64,
) -> Result<Vec<Matrix>> {
    shape.check_weights(weights)?;
    shape.check_data(x, y)?;
    let n = shape.n_layers;
    // vs[i] = Vᵢ for i < N, zs[i-1] = WᵢV_{i−1}.
    let mut vs = vec![x.clone()];
    let mut zs = Vec::with_capacity(n - 1);
    for i in 1..n {
        let act = shape.act(i);
        let z = weights[i - 1].matmul(&vs[i - 1])?;
        vs.push(vs[i - 1].add(&z.map(|t| act.eval(t)))?);
        zs.push(z);
    }
    let out = weights[n - 1].matmul(&vs[n - 1])?;
    let g = out.sub(y)?.scale(s);

    let mut grads = vec![Matrix::zeros(0, 0); n];
    grads[n - 1] = g.matmul_t(&vs[n - 1])?.lincomb(1.0, &weights[n - 1], lambda)?;
    let mut delta = weights[n - 1].t_matmul(&g)?;
    for i in (1..n).rev() {
        let act = shape.act(i);
        let e = delta.hadamard(&zs[i - 1].map(|t| act.deriv(t)))?;
        grads[i - 1] = e.matmul_t(&vs[i - 1])?.lincomb(1.0, &weights[i - 1], lambda)?;
        delta = delta.add(&weights[i - 1].t_matmul(&e)?)?;
    }
    Ok(grads)
}

/// Per-parameter optimizer memory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptState {
    /// Velocity for sgdm, first moment for adam.
    pub m: Vec<Matrix>,
    /// Second moment for adam.
    pub v: Vec<Matrix>,
    pub t: u64,
}

impl OptState {
    pub fn new(weights: &[Matrix]) -> Self {
        let zeros: Vec<Matrix> = weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect();
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }
}

pub fn step_sgd(weights: &mut [Matrix], grads: &[Matrix], state: &mut OptState, cfg: &OptimizerConfig) -> Result<()> {
    for (w, g) in weights.iter_mut().zip(grads) {
        *w = w.lincomb(1.0, g, -cfg.lr)?;
    }
    state.t += 1;
    Ok(())
}

/// v ← m·v + g, w ← w − lr·v.
pub fn step_sgdm(weights: &mut [Matrix], grads: &[Matrix], state: &mut OptState, cfg: &OptimizerConfig) -> Result<()> {
    for ((w, g), v) in weights.iter_mut().zip(grads).zip(state.m.iter_mut()) {
        *v = v.lincomb(cfg.momentum, g, 1.0)?;
        *w = w.lincomb(1.0, v, -cfg.lr)?;
    }
    state.t += 1;
    Ok(())
}

pub fn step_adam(weights: &mut [Matrix], grads: &[Matrix], state: &mut OptState, cfg: &OptimizerConfig) -> Result<()> {
    state.t += 1;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (((w, g), m), v) in weights.iter_mut().zip(grads).zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        *m = m.lincomb(b1, g, 1.0 - b1)?;
        *v = v.zip_with(g, |a, gi| b2 * a + (1.0 - b2) * gi * gi);
        let dir = m.zip_with(v, |mi, vi| (mi / c1) / ((vi / c2).sqrt() + cfg.eps));
        *w = w.lincomb(1.0, &dir, -cfg.lr)?;
    }
    Ok(())
}

pub fn step(weights: &mut [Matrix], grads: &[Matrix], state: &mut OptState, cfg: &OptimizerConfig) -> Result<()> {
    match cfg.kind {
        OptimizerKind::Sgd => step_sgd(weights, grads, state, cfg),
        OptimizerKind::Sgdm => step_sgdm(weights, grads, state, cfg),
        OptimizerKind::Adam => step_adam(weights, grads, state, cfg),
    }
}

/// Minibatch updates in one epoch.
pub fn steps_per_epoch(n_train: usize, batch: usize) -> usize {
    n_train.div_ceil(batch.max(1))
}

/// Mean squared error over samples plus the l2 term; what the baselines minimize.
pub fn training_loss(weights: &[Matrix], shape: &NetworkShape, data: &Dataset, l2: f64) -> Result<f64> {
    let pred = predict(weights, shape, &data.x)?;
    let reg: f64 = weights.iter().map(Matrix::frob_sq).sum();
    Ok(mse(&pred, &data.y)? + 0.5 * l2 * reg)
}

/// Full-batch gradient of [`training_loss`].
pub fn training_grad(weights: &[Matrix], shape: &NetworkShape, data: &Dataset, l2: f64) -> Result<Vec<Matrix>> {
    backprop_scaled(weights, shape, &data.x, &data.y, 2.0 / data.n() as f64, l2)
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub weights: Vec<Matrix>,
    /// One row per epoch.
    pub trace: Vec<TraceRecord>,
    /// W₁..W_N after every epoch.
    pub epoch_weights: Vec<Vec<Matrix>>,
    /// Minibatch updates performed.
    pub updates: usize,
}

/// Trains from weights drawn by `init` with `seed`; batches are reshuffled
/// every epoch from a generator seeded with `seed`.
pub fn train_baseline(
    shape: &NetworkShape,
    data: &Dataset,
    cfg: &OptimizerConfig,
    init: &Init,
    epochs: usize,
    seed: u64,
) -> Result<BaselineRun> {
    train_baseline_from(shape, data, cfg, init.weights(shape, seed), epochs, seed)
}

pub fn train_baseline_from(
    shape: &NetworkShape,
    data: &Dataset,
    cfg: &OptimizerConfig,
    mut weights: Vec<Matrix>,
    epochs: usize,
    seed: u64,
) -> Result<BaselineRun> {
    cfg.validate()?;
    shape.check_weights(&weights)?;
    shape.check_data(&data.x, &data.y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ba5e);
    let mut opt = OptState::new(&weights);
    let mut run_cfg = cfg.clone();
    let mut idx: Vec<usize> = (0..data.n()).collect();
    let mut trace = Vec::with_capacity(epochs);
    let mut prev_loss = training_loss(&weights, shape, data, cfg.l2)?;
    let mut updates = 0;
    let mut epoch_weights = Vec::with_capacity(epochs);
    for k in 1..=epochs {
        let before = weights.clone();
        let start = Instant::now();
        let (res, ops) = flops::measure(|| -> Result<()> {
            idx.shuffle(&mut rng);
            for chunk in idx.chunks(cfg.batch_size) {
                let b = data.select(chunk);
                let g = backprop_scaled(&weights, shape, &b.x, &b.y, 2.0 / chunk.len() as f64, cfg.l2)?;
                step(&mut weights, &g, &mut opt, &run_cfg)?;
                updates += 1;
            }
            Ok(())
        });
        res?;
        let wall_ns = start.elapsed().as_nanos() as u64;
        run_cfg.lr *= cfg.lr_decay;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite { k, what: "baseline weights".into() });
        }
        let loss = training_loss(&weights, shape, data, cfg.l2)?;
        let grad = training_grad(&weights, shape, data, cfg.l2)?.iter().map(Matrix::frob_sq).sum::<f64>().sqrt();
        let delta_x = weights.iter().zip(&before).map(|(a, b)| a.dist_sq(b)).sum::<std::result::Result<f64, _>>()?.sqrt();
        let objective = crate::model::objective(&weights, shape, &data.x, &data.y, cfg.l2)?;
        trace.push(TraceRecord {
            k,
            objective,
            aug_lag: objective,
            aux_lag: loss,
            delta_x,
            grad_lag: grad,
            kkt: grad,
            b1_margin: prev_loss - loss,
            b2_ratio: b2_ratio(grad, delta_x),
            op_count: ops,
            wall_ns,
        });
        prev_loss = loss;
        epoch_weights.push(weights.clone());
    }
    Ok(BaselineRun { weights, trace, epoch_weights, updates })
}
