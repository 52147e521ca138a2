//! 2-splitting ADMM: auxiliary layer outputs V₁..V_N and one dual Λ on the
//! linear output constraint W_N V_{N−1} = V_N.

use std::time::Instant;

use crate::analysis::{self, TraceRecord};
use crate::assumptions::{AssumptionReport, Mode};
use crate::linalg::{flops, Matrix};
use crate::model::{forward, Dataset, NetworkShape};
use crate::schedule::Schedule;
use crate::solver::{InnerConfig, InnerReport, InnerStats};
use crate::updates::{self, VHidden};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Prox2 {
    /// Proximal-point W and V updates solved by the inner solver.
    Point { omega: Schedule, nu: Schedule },
    /// Linearized closed-form W and V updates.
    Grad { tau: Schedule, iota: Schedule },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Admm2Hyper {
    pub lambda: f64,
    pub mu: f64,
    pub beta: f64,
    pub prox: Prox2,
    pub inner: InnerConfig,
}

impl Admm2Hyper {
    /// β=1, μ=0.1, λ=0.001, τ≡ι≡1: the sigmoid l1-fitting preset.
    pub fn preset_prox_grad() -> Self {
        Self {
            lambda: 0.001,
            mu: 0.1,
            beta: 1.0,
            prox: Prox2::Grad { tau: Schedule::Constant(1.0), iota: Schedule::Constant(1.0) },
            inner: InnerConfig::default(),
        }
    }

    pub fn prox_point(lambda: f64, mu: f64, beta: f64, omega: f64, nu: f64) -> Self {
        Self {
            lambda,
            mu,
            beta,
            prox: Prox2::Point { omega: Schedule::Constant(omega), nu: Schedule::Constant(nu) },
            inner: InnerConfig::default(),
        }
    }

    pub fn is_prox_point(&self) -> bool {
        matches!(self.prox, Prox2::Point { .. })
    }

    /// Hard errors for unusable values; the convergence assumptions go into
    /// the report and only abort in strict mode.
    pub fn validate(&self, shape: &NetworkShape, mode: Mode) -> Result<AssumptionReport> {
        for (name, v) in [("lambda", self.lambda), ("mu", self.mu), ("beta", self.beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidHyper(format!("{name} must be positive, got {v}")));
            }
        }
        let layers = shape.n_layers - 1;
        let mut report = AssumptionReport::default();
        match &self.prox {
            Prox2::Point { omega, nu } => {
                omega.validate("omega", layers)?;
                nu.validate("nu", layers)?;
                for i in 1..=layers {
                    report.push(
                        format!("bounded omega_{i}, nu_{i}"),
                        true,
                        format!("omega in [{}, {}], nu in [{}, {}]", omega.min(i), omega.max(i), nu.min(i), nu.max(i)),
                    );
                }
            }
            Prox2::Grad { tau, iota } => {
                tau.validate("tau", layers)?;
                iota.validate("iota", layers)?;
            }
        }
        let smooth = shape.activations.iter().all(|a| a.is_smooth());
        report.push("smooth bounded activations", smooth, format!("{:?}", shape.activations));
        report.push("beta > 1", self.beta > 1.0, format!("beta = {}", self.beta));
        report.enforce(mode)
    }
}

/// Iterate Xᵏ = ({Wᵢ}, {Vᵢ}, Λ). `v[i-1]` holds Vᵢ; V₀ is the data X.
#[derive(Debug, Clone, PartialEq)]
pub struct Admm2State {
    pub w: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub lambda: Matrix,
    pub k: usize,
}

impl Admm2State {
    /// Vᵢ with V₀ = X.
    #[inline]
    pub fn v_at<'a>(&'a self, x: &'a Matrix, i: usize) -> &'a Matrix {
        if i == 0 {
            x
        } else {
            &self.v[i - 1]
        }
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Matrix> {
        self.w.iter().chain(&self.v).chain(std::iter::once(&self.lambda))
    }

    pub fn entries(&self) -> usize {
        self.blocks().map(Matrix::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().all(Matrix::is_finite)
    }

    /// ‖X − other‖_F over all blocks.
    pub fn distance(&self, other: &Admm2State) -> Result<f64> {
        let mut s = 0.0;
        for (a, b) in self.blocks().zip(other.blocks()) {
            s += a.dist_sq(b)?;
        }
        Ok(s.sqrt())
    }

    pub fn max_abs_diff(&self, other: &Admm2State) -> Result<f64> {
        let mut m: f64 = 0.0;
        for (a, b) in self.blocks().zip(other.blocks()) {
            m = m.max(a.max_abs_diff(b)?);
        }
        Ok(m)
    }

    fn check_finite(&self) -> Result<()> {
        let n = self.w.len();
        for (i, w) in self.w.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFinite { k: self.k, what: format!("W_{}", i + 1) });
            }
        }
        for (i, v) in self.v.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { k: self.k, what: format!("V_{}", i + 1) });
            }
        }
        if !self.lambda.is_finite() {
            return Err(Error::NonFinite { k: self.k, what: format!("Lambda (N={n})") });
        }
        Ok(())
    }
}

/// Work done by one serial cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    pub ops: u64,
    pub inner: InnerStats,
}

/// Problem data plus hyperparameters; all update methods read the current
/// iterate in `state`, so calling them in the serial order reproduces a cycle.
#[derive(Debug, Clone, Copy)]
pub struct Admm2<'a> {
    pub shape: &'a NetworkShape,
    pub x: &'a Matrix,
    pub y: &'a Matrix,
    pub hyper: &'a Admm2Hyper,
}

impl<'a> Admm2<'a> {
    pub fn new(shape: &'a NetworkShape, data: &'a Dataset, hyper: &'a Admm2Hyper) -> Result<Self> {
        shape.check_data(&data.x, &data.y)?;
        hyper.validate(shape, Mode::Permissive)?;
        Ok(Self { shape, x: &data.x, y: &data.y, hyper })
    }

    pub fn n_layers(&self) -> usize {
        self.shape.n_layers
    }

    /// V from the forward pass, Λ = O.
    pub fn init(&self, weights: &[Matrix]) -> Result<Admm2State> {
        let mut vs = forward(weights, self.shape, self.x)?;
        vs.remove(0);
        Ok(Admm2State {
            w: weights.to_vec(),
            v: vs,
            lambda: Matrix::zeros(self.shape.q, self.x.cols()),
            k: 0,
        })
    }

    pub fn aug_lag(&self, s: &Admm2State) -> Result<f64> {
        let n = self.n_layers();
        let h = self.hyper;
        let mut total = 0.5 * s.v[n - 1].dist_sq(self.y)?;
        total += 0.5 * h.lambda * s.w.iter().map(Matrix::frob_sq).sum::<f64>();
        for i in 1..n {
            total += 0.5 * h.mu * self.layer_residual(s, i)?.frob_sq();
        }
        let feas = s.w[n - 1].matmul(&s.v[n - 2])?.sub(&s.v[n - 1])?;
        total += s.lambda.inner(&feas)? + 0.5 * h.beta * feas.frob_sq();
        Ok(total)
    }

    /// V_{i−1} + σᵢ(Wᵢ V_{i−1}) − Vᵢ.
    pub fn layer_residual(&self, s: &Admm2State, i: usize) -> Result<Matrix> {
        let act = self.shape.act(i);
        let vin = s.v_at(self.x, i - 1);
        Ok(vin.add(&s.w[i - 1].matmul(vin)?.map(|t| act.eval(t)))?.sub(&s.v[i - 1])?)
    }

    pub fn update_wn(&self, s: &Admm2State) -> Result<Matrix> {
        let n = self.n_layers();
        updates::ridge_weight(&s.v[n - 1], &s.lambda, &s.v[n - 2], self.hyper.lambda, self.hyper.beta)
    }

    fn check_hidden(&self, i: usize, last: usize, what: &str) -> Result<()> {
        if i == 0 || i > last {
            return Err(Error::Shape(format!("{what} index {i} outside 1..={last}")));
        }
        Ok(())
    }

    pub fn update_wi_prox_point(&self, s: &Admm2State, i: usize, omega: f64) -> Result<(Matrix, InnerReport)> {
        self.check_hidden(i, self.n_layers() - 1, "W")?;
        updates::w_prox_point(
            &s.w[i - 1],
            s.v_at(self.x, i - 1),
            &s.v[i - 1],
            self.shape.act(i),
            self.hyper.lambda,
            self.hyper.mu,
            omega,
            &self.hyper.inner,
        )
    }

    pub fn update_wi_prox_grad(&self, s: &Admm2State, i: usize, tau: f64) -> Result<Matrix> {
        self.check_hidden(i, self.n_layers() - 1, "W")?;
        updates::w_prox_grad(
            &s.w[i - 1],
            s.v_at(self.x, i - 1),
            &s.v[i - 1],
            self.shape.act(i),
            self.hyper.lambda,
            self.hyper.mu,
            tau,
        )
    }

    /// Wᵢ update under the configured variant with the schedule at `s.k`.
    pub fn update_wi(&self, s: &Admm2State, i: usize, stats: &mut InnerStats) -> Result<Matrix> {
        match &self.hyper.prox {
            Prox2::Point { omega, .. } => {
                let (w, rep) = self.update_wi_prox_point(s, i, omega.value(i, s.k))?;
                stats.record(&rep);
                Ok(w)
            }
            Prox2::Grad { tau, .. } => self.update_wi_prox_grad(s, i, tau.value(i, s.k)),
        }
    }

    pub fn v_hidden<'s>(&'s self, s: &'s Admm2State, i: usize) -> Result<VHidden<'s>> {
        self.check_hidden(i, self.n_layers().saturating_sub(2), "hidden V")?;
        Ok(VHidden {
            v_prev: s.v_at(self.x, i - 1),
            w: &s.w[i - 1],
            w_next: &s.w[i],
            v_old: &s.v[i - 1],
            v_next: &s.v[i],
            act: self.shape.act(i),
            act_next: self.shape.act(i + 1),
            mu: self.hyper.mu,
        })
    }

    pub fn update_vi_prox_point(&self, s: &Admm2State, i: usize, nu: f64) -> Result<(Matrix, InnerReport)> {
        self.v_hidden(s, i)?.prox_point(nu, &self.hyper.inner)
    }

    pub fn update_vi_prox_grad(&self, s: &Admm2State, i: usize, iota: f64) -> Result<Matrix> {
        self.v_hidden(s, i)?.prox_grad(iota)
    }

    pub fn update_vi(&self, s: &Admm2State, i: usize, stats: &mut InnerStats) -> Result<Matrix> {
        match &self.hyper.prox {
            Prox2::Point { nu, .. } => {
                let (v, rep) = self.update_vi_prox_point(s, i, nu.value(i, s.k))?;
                stats.record(&rep);
                Ok(v)
            }
            Prox2::Grad { iota, .. } => self.update_vi_prox_grad(s, i, iota.value(i, s.k)),
        }
    }

    pub fn update_vn1(&self, s: &Admm2State) -> Result<Matrix> {
        let n = self.n_layers();
        let act = self.shape.act(n - 1);
        let vin = s.v_at(self.x, n - 2);
        let base = vin.add(&s.w[n - 2].matmul(vin)?.map(|t| act.eval(t)))?;
        updates::v_penultimate(&base, &s.w[n - 1], &s.v[n - 1], &s.lambda, self.hyper.mu, self.hyper.beta)
    }

    pub fn update_vn(&self, s: &Admm2State) -> Result<Matrix> {
        let n = self.n_layers();
        updates::v_last(self.y, &s.w[n - 1], &s.v[n - 2], &s.lambda, self.hyper.beta)
    }

    pub fn update_lambda(&self, s: &Admm2State) -> Result<Matrix> {
        let n = self.n_layers();
        updates::dual_ascent(&s.lambda, &s.w[n - 1], &s.v[n - 2], &s.v[n - 1], self.hyper.beta)
    }

    /// One cycle in place: W_N, W_{N−1}..W₁, V₁..V_{N−2}, V_{N−1}, V_N, Λ.
    pub fn step(&self, s: &mut Admm2State) -> Result<StepInfo> {
        let n = self.n_layers();
        let mut inner = InnerStats::default();
        let (res, ops) = flops::measure(|| -> Result<()> {
            s.w[n - 1] = self.update_wn(s)?;
            for i in (1..n).rev() {
                s.w[i - 1] = self.update_wi(s, i, &mut inner)?;
            }
            for i in 1..n - 1 {
                s.v[i - 1] = self.update_vi(s, i, &mut inner)?;
            }
            s.v[n - 2] = self.update_vn1(s)?;
            s.v[n - 1] = self.update_vn(s)?;
            s.lambda = self.update_lambda(s)?;
            Ok(())
        });
        res?;
        s.k += 1;
        s.check_finite()?;
        Ok(StepInfo { ops, inner })
    }
}

pub fn init_2s(ctx: &Admm2, weights: &[Matrix]) -> Result<Admm2State> {
    ctx.init(weights)
}

pub fn aug_lag_2s(ctx: &Admm2, state: &Admm2State) -> Result<f64> {
    ctx.aug_lag(state)
}

/// One serial cycle plus its diagnostics row.
pub fn step_serial_2s(ctx: &Admm2, state: &mut Admm2State) -> Result<TraceRecord> {
    let prev = state.clone();
    let prev_merit = ctx.aug_lag(&prev)?;
    let start = Instant::now();
    let info = ctx.step(state)?;
    let wall_ns = start.elapsed().as_nanos() as u64;
    analysis::record_2s(ctx, &prev, prev_merit, state, info.ops, wall_ns)
}
