//! 3-splitting ADMM: pre-activations Uᵢ, layer outputs Vᵢ, and one dual Λᵢ per
//! linear constraint WᵢV_{i−1} = Uᵢ (i < N) and W_N V_{N−1} = V_N.

use std::f64::consts::SQRT_2;
use std::time::Instant;

use crate::analysis::{self, TraceRecord};
use crate::assumptions::{AssumptionReport, Mode};
use crate::linalg::{flops, Matrix};
use crate::model::{forward, Dataset, NetworkShape};
use crate::schedule::Schedule;
use crate::admm2::StepInfo;
use crate::updates::{self, UProx};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Prox3 {
    /// Proximal-point U update, solved entrywise.
    Point { omega: Schedule },
    /// Linearized closed-form U update.
    Grad { tau: Schedule },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Admm3Hyper {
    pub lambda: f64,
    pub mu: f64,
    /// β₁..β_N.
    pub beta: Vec<f64>,
    pub prox: Prox3,
    /// 𝒱₀..𝒱_{N−1}: assumed bounds on ‖Vᵢ‖_F. `None` leaves the
    /// bound-dependent checks failed and θᵢ at zero.
    pub vmax: Option<Vec<f64>>,
    /// ε̂ᵢ; defaults to √Δᵢ/64.
    pub eps_hat: Option<Vec<f64>>,
    /// εᵢ; defaults to ωᵢ^min/8.
    pub eps: Option<Vec<f64>>,
    /// Stationarity tolerance of the entrywise U solver.
    pub u_tol: f64,
}

impl Admm3Hyper {
    /// βᵢ≡100, μ=1, λ=0.0001, τ≡10: the sigmoid l1-fitting preset.
    pub fn preset_prox_grad(n_layers: usize) -> Self {
        Self {
            lambda: 1e-4,
            mu: 1.0,
            beta: vec![100.0; n_layers],
            prox: Prox3::Grad { tau: Schedule::Constant(10.0) },
            vmax: None,
            eps_hat: None,
            eps: None,
            u_tol: 1e-10,
        }
    }

    pub fn beta_at(&self, i: usize) -> f64 {
        self.beta[i - 1]
    }
}

/// Per-layer quantities for i = 1..N−1 (index i−1).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Admm3Derived {
    /// ψ₀ψ₂ + ψ₁² + 𝒱ᵢψ₂ + 𝒱_{i−1}ψ₂.
    pub s: Vec<f64>,
    pub delta: Vec<f64>,
    pub omega_min: Vec<f64>,
    pub omega_max: Vec<f64>,
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    pub report: AssumptionReport,
}

/// Checks the parameter assumptions of the 3-splitting analysis and derives
/// Δᵢ, ωᵢ^min, ωᵢ^max, θᵢ, ηᵢ. `x_norm` is ‖X‖_F, checked against 𝒱₀.
pub fn validate_3s_params(
    hyper: &Admm3Hyper,
    shape: &NetworkShape,
    x_norm: Option<f64>,
    mode: Mode,
) -> Result<Admm3Derived> {
    let n = shape.n_layers;
    let (lambda, mu) = (hyper.lambda, hyper.mu);
    if !(lambda > 0.0) || !(mu > 0.0) {
        return Err(Error::InvalidHyper(format!("lambda and mu must be positive (lambda={lambda}, mu={mu})")));
    }
    if hyper.beta.len() != n || hyper.beta.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidHyper(format!("need {n} positive beta values, got {:?}", hyper.beta)));
    }
    if let Some(v) = &hyper.vmax {
        if v.len() != n || v.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::InvalidHyper(format!("need {n} non-negative vmax values (V_0..V_(N-1))")));
        }
    }
    for (name, list) in [("eps_hat", &hyper.eps_hat), ("eps", &hyper.eps)] {
        if let Some(l) = list {
            if l.len() != n - 1 {
                return Err(Error::InvalidHyper(format!("{name} needs {} values", n - 1)));
            }
        }
    }
    match &hyper.prox {
        Prox3::Point { omega } => omega.validate("omega", n - 1)?,
        Prox3::Grad { tau } => tau.validate("tau", n - 1)?,
    }

    let mut d = Admm3Derived::default();
    let r = &mut d.report;
    let beta_n = hyper.beta[n - 1];
    r.push("beta_N > 1", beta_n > 1.0, format!("beta_N = {beta_n}"));
    match (&hyper.vmax, x_norm) {
        (Some(v), Some(xn)) => r.push("V_0 bound covers ||X||_F", v[0] >= xn, format!("vmax_0 = {}, ||X||_F = {xn:.6}", v[0])),
        (None, _) => r.push("vmax provided", false, "no V bounds given"),
        _ => {}
    }
    for i in 1..n {
        let act = shape.act(i);
        let beta = hyper.beta_at(i);
        let Some(b) = act.bounds() else {
            r.push(format!("layer {i} activation bounded"), false, format!("{act} has no bound triple"));
            for v in [&mut d.s, &mut d.delta, &mut d.omega_min, &mut d.omega_max, &mut d.theta] {
                v.push(f64::NAN);
            }
            d.eta.push(mu / 4.0);
            continue;
        };
        d.eta.push(4.0 * mu * mu * b.psi1 * b.psi1 / beta + mu / 4.0);
        let Some(vmax) = &hyper.vmax else {
            for v in [&mut d.s, &mut d.delta, &mut d.omega_min, &mut d.omega_max] {
                v.push(f64::NAN);
            }
            d.theta.push(0.0);
            continue;
        };
        let s = b.psi0 * b.psi2 + b.psi1 * b.psi1 + (vmax[i] + vmax[i - 1]) * b.psi2;
        let floor = (32.0 * (1.0 + SQRT_2) * mu * s).max(16.0 * mu * b.psi1 * b.psi1);
        r.push(format!("beta_{i} lower bound"), beta > floor, format!("beta_{i} = {beta}, bound = {floor:.6}"));

        let lead = beta / 4.0 - 8.0 * mu * s;
        let delta = lead * lead - 128.0 * mu * mu * s * s;
        r.push(format!("Delta_{i} > 0"), delta > 0.0, format!("Delta_{i} = {delta:.6e}"));
        let root = delta.max(0.0).sqrt();
        let eps_hat = hyper.eps_hat.as_ref().map_or(root / 64.0, |e| e[i - 1]);
        r.push(
            format!("eps_hat_{i} in (0, sqrt(Delta)/32)"),
            eps_hat > 0.0 && eps_hat < root / 32.0,
            format!("eps_hat_{i} = {eps_hat:.6e}"),
        );
        let omega_min = (lead - root) / 16.0 + eps_hat;
        let eps = hyper.eps.as_ref().map_or(omega_min / 8.0, |e| e[i - 1]);
        r.push(
            format!("eps_{i} in (0, omega_min/4)"),
            eps > 0.0 && eps < omega_min / 4.0,
            format!("eps_{i} = {eps:.6e}"),
        );
        let cap = omega_min * omega_min + beta * omega_min / 16.0 - beta * eps / 4.0;
        let omega_max = if cap >= 0.0 { ((lead + root) / 16.0 - eps_hat).min(cap.sqrt()) } else { f64::NAN };
        let window = omega_min > 0.0 && omega_max > omega_min;
        r.push(
            format!("omega_{i} window"),
            window,
            format!("omega_min = {omega_min:.6}, omega_max = {omega_max:.6}"),
        );
        if let Prox3::Point { omega } = &hyper.prox {
            let (lo, hi) = (omega.min(i), omega.max(i));
            r.push(
                format!("omega_{i} schedule inside window and non-decreasing"),
                lo > omega_min && hi < omega_max && omega.is_nondecreasing(i),
                format!("schedule in [{lo}, {hi}]"),
            );
        }
        d.theta.push(if window { theta(omega_min, beta) } else { 0.0 });
        d.s.push(s);
        d.delta.push(delta);
        d.omega_min.push(omega_min);
        d.omega_max.push(omega_max);
    }
    d.report = std::mem::take(&mut d.report).enforce(mode)?;
    Ok(d)
}

/// θ = 4(ω^min)²/β + ω^min/4.
pub fn theta(omega_min: f64, beta: f64) -> f64 {
    4.0 * omega_min * omega_min / beta + omega_min / 4.0
}

/// Iterate plus the lagged copies U′ = Uᵏ⁻¹, V′ = Vᵏ⁻¹ used by the auxiliary function.
#[derive(Debug, Clone, PartialEq)]
pub struct Admm3State {
    pub w: Vec<Matrix>,
    pub u: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub lambda: Vec<Matrix>,
    pub u_lag: Vec<Matrix>,
    /// V′₁..V′_{N−1}.
    pub v_lag: Vec<Matrix>,
    pub k: usize,
}

impl Admm3State {
    #[inline]
    pub fn v_at<'a>(&'a self, x: &'a Matrix, i: usize) -> &'a Matrix {
        if i == 0 {
            x
        } else {
            &self.v[i - 1]
        }
    }

    /// The blocks of Xᵏ (without the lagged copies).
    pub fn blocks(&self) -> impl Iterator<Item = &Matrix> {
        self.w.iter().chain(&self.u).chain(&self.v).chain(&self.lambda)
    }

    pub fn lag_blocks(&self) -> impl Iterator<Item = &Matrix> {
        self.u_lag.iter().chain(&self.v_lag)
    }

    pub fn entries(&self) -> usize {
        self.blocks().map(Matrix::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().all(Matrix::is_finite)
    }

    pub fn max_abs_diff(&self, other: &Admm3State) -> Result<f64> {
        let mut m: f64 = 0.0;
        for (a, b) in self.blocks().zip(other.blocks()).chain(self.lag_blocks().zip(other.lag_blocks())) {
            m = m.max(a.max_abs_diff(b)?);
        }
        Ok(m)
    }

    /// ‖X′ − other′‖_F including the lagged blocks.
    pub fn distance(&self, other: &Admm3State) -> Result<f64> {
        let mut s = 0.0;
        for (a, b) in self.blocks().zip(other.blocks()).chain(self.lag_blocks().zip(other.lag_blocks())) {
            s += a.dist_sq(b)?;
        }
        Ok(s.sqrt())
    }

    fn check_finite(&self) -> Result<()> {
        let groups: [(&str, &Vec<Matrix>); 4] = [("W", &self.w), ("U", &self.u), ("V", &self.v), ("Lambda", &self.lambda)];
        for (name, group) in groups {
            if let Some(i) = group.iter().position(|m| !m.is_finite()) {
                return Err(Error::NonFinite { k: self.k, what: format!("{name}_{}", i + 1) });
            }
        }
        Ok(())
    }
}

pub struct Admm3<'a> {
    pub shape: &'a NetworkShape,
    pub x: &'a Matrix,
    pub y: &'a Matrix,
    pub hyper: &'a Admm3Hyper,
    pub derived: Admm3Derived,
}

impl<'a> Admm3<'a> {
    pub fn new(shape: &'a NetworkShape, data: &'a Dataset, hyper: &'a Admm3Hyper, mode: Mode) -> Result<Self> {
        shape.check_data(&data.x, &data.y)?;
        let derived = validate_3s_params(hyper, shape, Some(data.x.frob_norm()), mode)?;
        Ok(Self { shape, x: &data.x, y: &data.y, hyper, derived })
    }

    pub fn n_layers(&self) -> usize {
        self.shape.n_layers
    }

    /// Uᵢ = WᵢV_{i−1}, V from the forward pass, Λ = O.
    pub fn init(&self, weights: &[Matrix]) -> Result<Admm3State> {
        let n = self.n_layers();
        let mut vs = forward(weights, self.shape, self.x)?;
        let u = (1..n).map(|i| weights[i - 1].matmul(&vs[i - 1])).collect::<std::result::Result<Vec<_>, _>>()?;
        vs.remove(0);
        let cols = self.x.cols();
        let mut lambda: Vec<Matrix> = (1..n).map(|_| Matrix::zeros(self.shape.d, cols)).collect();
        lambda.push(Matrix::zeros(self.shape.q, cols));
        Ok(Admm3State {
            w: weights.to_vec(),
            u_lag: u.clone(),
            v_lag: vs[..n - 1].to_vec(),
            u,
            v: vs,
            lambda,
            k: 0,
        })
    }

    pub fn aug_lag(&self, s: &Admm3State) -> Result<f64> {
        let n = self.n_layers();
        let h = self.hyper;
        let mut total = 0.5 * s.v[n - 1].dist_sq(self.y)?;
        total += 0.5 * h.lambda * s.w.iter().map(Matrix::frob_sq).sum::<f64>();
        for i in 1..n {
            let act = self.shape.act(i);
            let vin = s.v_at(self.x, i - 1);
            let r = vin.add(&s.u[i - 1].map(|t| act.eval(t)))?.sub(&s.v[i - 1])?;
            total += 0.5 * h.mu * r.frob_sq();
            let feas = s.w[i - 1].matmul(vin)?.sub(&s.u[i - 1])?;
            total += s.lambda[i - 1].inner(&feas)? + 0.5 * h.beta_at(i) * feas.frob_sq();
        }
        let feas = s.w[n - 1].matmul(&s.v[n - 2])?.sub(&s.v[n - 1])?;
        total += s.lambda[n - 1].inner(&feas)? + 0.5 * h.beta_at(n) * feas.frob_sq();
        Ok(total)
    }

    /// L³ˢ(X) + Σθᵢ‖Uᵢ − U′ᵢ‖² + Σηᵢ‖Vᵢ − V′ᵢ‖².
    pub fn aux_function(&self, s: &Admm3State) -> Result<f64> {
        let mut total = self.aug_lag(s)?;
        for i in 1..self.n_layers() {
            total += self.derived.theta[i - 1] * s.u[i - 1].dist_sq(&s.u_lag[i - 1])?;
            total += self.derived.eta[i - 1] * s.v[i - 1].dist_sq(&s.v_lag[i - 1])?;
        }
        Ok(total)
    }

    pub fn update_wn(&self, s: &Admm3State) -> Result<Matrix> {
        let n = self.n_layers();
        updates::ridge_weight(&s.v[n - 1], &s.lambda[n - 1], &s.v[n - 2], self.hyper.lambda, self.hyper.beta_at(n))
    }

    pub fn update_wi(&self, s: &Admm3State, i: usize) -> Result<Matrix> {
        updates::ridge_weight(&s.u[i - 1], &s.lambda[i - 1], s.v_at(self.x, i - 1), self.hyper.lambda, self.hyper.beta_at(i))
    }

    pub fn u_prox(&self, i: usize, omega: f64) -> UProx {
        UProx { act: self.shape.act(i), mu: self.hyper.mu, beta: self.hyper.beta_at(i), omega, tol: self.hyper.u_tol }
    }

    pub fn update_ui_prox_point(&self, s: &Admm3State, i: usize, omega: f64) -> Result<Matrix> {
        updates::u_prox_point(&s.u[i - 1], s.v_at(self.x, i - 1), &s.v[i - 1], &s.w[i - 1], &s.lambda[i - 1], &self.u_prox(i, omega))
    }

    pub fn update_ui_prox_grad(&self, s: &Admm3State, i: usize, tau: f64) -> Result<Matrix> {
        updates::u_prox_grad(
            &s.u[i - 1],
            s.v_at(self.x, i - 1),
            &s.v[i - 1],
            &s.w[i - 1],
            &s.lambda[i - 1],
            self.shape.act(i),
            self.hyper.mu,
            self.hyper.beta_at(i),
            tau,
        )
    }

    pub fn update_ui(&self, s: &Admm3State, i: usize) -> Result<Matrix> {
        match &self.hyper.prox {
            Prox3::Point { omega } => self.update_ui_prox_point(s, i, omega.value(i, s.k)),
            Prox3::Grad { tau } => self.update_ui_prox_grad(s, i, tau.value(i, s.k)),
        }
    }

    pub fn update_vi(&self, s: &Admm3State, i: usize) -> Result<Matrix> {
        let n = self.n_layers();
        if i == 0 || i + 2 > n {
            return Err(Error::Shape(format!("hidden V index {i} outside 1..={}", n - 2)));
        }
        updates::v_hidden_3s(
            s.v_at(self.x, i - 1),
            &s.u[i - 1],
            &s.u[i],
            &s.v[i],
            &s.w[i],
            &s.lambda[i],
            self.shape.act(i),
            self.shape.act(i + 1),
            self.hyper.mu,
            self.hyper.beta_at(i + 1),
        )
    }

    pub fn update_vn1(&self, s: &Admm3State) -> Result<Matrix> {
        let n = self.n_layers();
        let act = self.shape.act(n - 1);
        let base = s.v_at(self.x, n - 2).add(&s.u[n - 2].map(|t| act.eval(t)))?;
        updates::v_penultimate(&base, &s.w[n - 1], &s.v[n - 1], &s.lambda[n - 1], self.hyper.mu, self.hyper.beta_at(n))
    }

    pub fn update_vn(&self, s: &Admm3State) -> Result<Matrix> {
        let n = self.n_layers();
        updates::v_last(self.y, &s.w[n - 1], &s.v[n - 2], &s.lambda[n - 1], self.hyper.beta_at(n))
    }

    pub fn update_lambda_i(&self, s: &Admm3State, i: usize) -> Result<Matrix> {
        updates::dual_ascent(&s.lambda[i - 1], &s.w[i - 1], s.v_at(self.x, i - 1), &s.u[i - 1], self.hyper.beta_at(i))
    }

    pub fn update_lambda_n(&self, s: &Admm3State) -> Result<Matrix> {
        let n = self.n_layers();
        updates::dual_ascent(&s.lambda[n - 1], &s.w[n - 1], &s.v[n - 2], &s.v[n - 1], self.hyper.beta_at(n))
    }

    /// One cycle in place: W_N..W₁, (U₁,V₁)..(U_{N−2},V_{N−2}), U_{N−1}, V_{N−1}, V_N, Λ₁..Λ_N.
    pub fn step(&self, s: &mut Admm3State) -> Result<StepInfo> {
        let n = self.n_layers();
        s.u_lag = s.u.clone();
        s.v_lag = s.v[..n - 1].to_vec();
        let (res, ops) = flops::measure(|| -> Result<()> {
            s.w[n - 1] = self.update_wn(s)?;
            for i in (1..n).rev() {
                s.w[i - 1] = self.update_wi(s, i)?;
            }
            for i in 1..n - 1 {
                s.u[i - 1] = self.update_ui(s, i)?;
                s.v[i - 1] = self.update_vi(s, i)?;
            }
            s.u[n - 2] = self.update_ui(s, n - 1)?;
            s.v[n - 2] = self.update_vn1(s)?;
            s.v[n - 1] = self.update_vn(s)?;
            for i in 1..n {
                s.lambda[i - 1] = self.update_lambda_i(s, i)?;
            }
            s.lambda[n - 1] = self.update_lambda_n(s)?;
            Ok(())
        });
        res?;
        s.k += 1;
        s.check_finite()?;
        Ok(StepInfo { ops, inner: Default::default() })
    }

    /// Layers i (0-based V index, V₀ = X) whose ‖Vᵢ‖_F exceeds the assumed bound.
    pub fn vmax_audit(&self, s: &Admm3State) -> Vec<(usize, f64, f64)> {
        let Some(vmax) = &self.hyper.vmax else { return Vec::new() };
        (0..self.n_layers())
            .filter_map(|i| {
                let norm = s.v_at(self.x, i).frob_norm();
                (norm > vmax[i]).then_some((i, norm, vmax[i]))
            })
            .collect()
    }
}

pub fn init_3s(ctx: &Admm3, weights: &[Matrix]) -> Result<Admm3State> {
    ctx.init(weights)
}

pub fn aug_lag_3s(ctx: &Admm3, state: &Admm3State) -> Result<f64> {
    ctx.aug_lag(state)
}

pub fn aux_function(ctx: &Admm3, state: &Admm3State) -> Result<f64> {
    ctx.aux_function(state)
}

/// One serial cycle plus its diagnostics row; the merit is the auxiliary function.
pub fn step_serial_3s(ctx: &Admm3, state: &mut Admm3State) -> Result<TraceRecord> {
    let prev = state.clone();
    let prev_merit = ctx.aux_function(&prev)?;
    let start = Instant::now();
    let info = ctx.step(state)?;
    let wall_ns = start.elapsed().as_nanos() as u64;
    analysis::record_3s(ctx, &prev, prev_merit, state, info.ops, wall_ns)
}
