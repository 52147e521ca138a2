//! Block-update kernels over explicit matrix arguments.
//!
//! Serial steps and parallel workers call exactly these functions with the
//! same inputs, which is what makes their iterates bit-identical.

use crate::linalg::{spd_solve, Matrix};
use crate::model::Activation;
use crate::solver::{minimize, newton_bisect, InnerConfig, InnerReport};
use crate::{Error, Result};

/// `(β·T − Λ)·Vᵀ·(λI + β·V·Vᵀ)⁻¹`, the closed-form weight update of both
/// splittings (T is V_N or Uᵢ, Λ the matching dual, V the layer input).
pub fn ridge_weight(target: &Matrix, dual: &Matrix, input: &Matrix, lambda: f64, beta: f64) -> Result<Matrix> {
    let mut a = input.matmul_t(input)?.scale(beta);
    a.add_diag(lambda);
    let rhs = input.matmul_t(&target.lincomb(beta, dual, -1.0)?)?;
    Ok(spd_solve(&a, &rhs)?.transpose())
}

/// Proximal-gradient Wᵢ: τ/(λ+τ)·W − μ/(λ+τ)·[(V_{i−1} + σ(W V_{i−1}) − Vᵢ) ⊙ σ′(W V_{i−1})] V_{i−1}ᵀ.
pub fn w_prox_grad(
    w_old: &Matrix,
    v_in: &Matrix,
    v_out: &Matrix,
    act: Activation,
    lambda: f64,
    mu: f64,
    tau: f64,
) -> Result<Matrix> {
    let z = w_old.matmul(v_in)?;
    let resid = v_in.add(&z.map(|t| act.eval(t)))?.sub(v_out)?;
    let g = resid.hadamard(&z.map(|t| act.deriv(t)))?.matmul_t(v_in)?;
    Ok(w_old.lincomb(tau / (lambda + tau), &g, -mu / (lambda + tau))?)
}

/// Value and gradient of (λ/2)‖W‖² + (μ/2)‖V_{i−1} + σ(W V_{i−1}) − Vᵢ‖² + (ω/2)‖W − W⁰‖².
#[allow(clippy::too_many_arguments)]
pub fn w_prox_objective(
    w: &Matrix,
    w_old: &Matrix,
    v_in: &Matrix,
    v_out: &Matrix,
    act: Activation,
    lambda: f64,
    mu: f64,
    omega: f64,
) -> Result<(f64, Matrix)> {
    let z = w.matmul(v_in)?;
    let resid = v_in.add(&z.map(|t| act.eval(t)))?.sub(v_out)?;
    let diff = w.sub(w_old)?;
    let value = 0.5 * lambda * w.frob_sq() + 0.5 * mu * resid.frob_sq() + 0.5 * omega * diff.frob_sq();
    let coupling = resid.hadamard(&z.map(|t| act.deriv(t)))?.matmul_t(v_in)?;
    let grad = w.lincomb(lambda, &diff, omega)?.add(&coupling.scale(mu))?;
    Ok((value, grad))
}

/// Proximal-point Wᵢ by the inner solver, warm-started at `w_old`.
#[allow(clippy::too_many_arguments)]
pub fn w_prox_point(
    w_old: &Matrix,
    v_in: &Matrix,
    v_out: &Matrix,
    act: Activation,
    lambda: f64,
    mu: f64,
    omega: f64,
    inner: &InnerConfig,
) -> Result<(Matrix, InnerReport)> {
    minimize(w_old, inner, |w| w_prox_objective(w, w_old, v_in, v_out, act, lambda, mu, omega))
}

/// Inputs of the 2-splitting hidden V update for layer i ≤ N−2.
#[derive(Debug, Clone, Copy)]
pub struct VHidden<'a> {
    /// V_{i−1}ᵏ.
    pub v_prev: &'a Matrix,
    /// Wᵢᵏ.
    pub w: &'a Matrix,
    /// W_{i+1}ᵏ.
    pub w_next: &'a Matrix,
    /// Vᵢᵏ⁻¹.
    pub v_old: &'a Matrix,
    /// V_{i+1}ᵏ⁻¹.
    pub v_next: &'a Matrix,
    pub act: Activation,
    pub act_next: Activation,
    pub mu: f64,
}

impl VHidden<'_> {
    fn incoming(&self) -> Result<Matrix> {
        let act = self.act;
        Ok(self.v_prev.add(&self.w.matmul(self.v_prev)?.map(|t| act.eval(t)))?)
    }

    /// Value and gradient of the proximal V subproblem at `v`.
    pub fn objective(&self, v: &Matrix, nu: f64) -> Result<(f64, Matrix)> {
        self.objective_with(&self.incoming()?, v, nu)
    }

    fn objective_with(&self, incoming: &Matrix, v: &Matrix, nu: f64) -> Result<(f64, Matrix)> {
        let an = self.act_next;
        let z = self.w_next.matmul(v)?;
        let s = v.add(&z.map(|t| an.eval(t)))?.sub(self.v_next)?;
        let first = v.sub(incoming)?;
        let diff = v.sub(self.v_old)?;
        let value = 0.5 * self.mu * (first.frob_sq() + s.frob_sq()) + 0.5 * nu * diff.frob_sq();
        let back = self.w_next.t_matmul(&s.hadamard(&z.map(|t| an.deriv(t)))?)?;
        let grad = first.add(&s)?.add(&back)?.lincomb(self.mu, &diff, nu)?;
        Ok((value, grad))
    }

    /// Proximal-gradient closed form with coefficient ι.
    pub fn prox_grad(&self, iota: f64) -> Result<Matrix> {
        let (act, an, mu) = (self.act, self.act_next, self.mu);
        let z_in = self.w.matmul(self.v_prev)?;
        let z_next = self.w_next.matmul(self.v_old)?;
        let sig_next = z_next.map(|t| an.eval(t));
        let bracket = self
            .v_prev
            .add(self.v_next)?
            .sub(self.v_old)?
            .add(&z_in.map(|t| act.eval(t)))?
            .sub(&sig_next)?;
        let s = self.v_old.add(&sig_next)?.sub(self.v_next)?;
        let back = self.w_next.t_matmul(&s.hadamard(&z_next.map(|t| an.deriv(t)))?)?;
        let c = mu / (mu + iota);
        Ok(bracket.lincomb(c, self.v_old, iota / (mu + iota))?.sub(&back.scale(c))?)
    }

    pub fn prox_point(&self, nu: f64, inner: &InnerConfig) -> Result<(Matrix, InnerReport)> {
        let incoming = self.incoming()?;
        minimize(self.v_old, inner, |v| self.objective_with(&incoming, v, nu))
    }
}

/// V_{N−1} = (μI + β W_NᵀW_N)⁻¹ [μ·base + W_Nᵀ(β V_N − Λ)], where `base` is
/// σ(W_{N−1}V_{N−2}) + V_{N−2} (2-splitting) or σ(U_{N−1}) + V_{N−2} (3-splitting).
pub fn v_penultimate(base: &Matrix, w_last: &Matrix, v_last: &Matrix, dual: &Matrix, mu: f64, beta: f64) -> Result<Matrix> {
    let mut a = w_last.t_matmul(w_last)?.scale(beta);
    a.add_diag(mu);
    let rhs = w_last.t_matmul(&v_last.lincomb(beta, dual, -1.0)?)?.add(&base.scale(mu))?;
    Ok(spd_solve(&a, &rhs)?)
}

/// V_N = (Y + β W_N V_{N−1} + Λ)/(1 + β).
pub fn v_last(y: &Matrix, w_last: &Matrix, v_pen: &Matrix, dual: &Matrix, beta: f64) -> Result<Matrix> {
    let wv = w_last.matmul(v_pen)?;
    Ok(y.add(dual)?.lincomb(1.0 / (1.0 + beta), &wv, beta / (1.0 + beta))?)
}

/// Λ + β(W V − T): the dual ascent of either splitting.
pub fn dual_ascent(dual: &Matrix, w: &Matrix, input: &Matrix, target: &Matrix, beta: f64) -> Result<Matrix> {
    let resid = w.matmul(input)?.sub(target)?;
    Ok(resid.axpy(beta, dual)?)
}

/// Proximal-gradient Uᵢ (3-splitting):
/// −μ/(τ+β)(V_{i−1} + σ(U⁰) − Vᵢ) ⊙ σ′(U⁰) + τ/(τ+β)U⁰ + β/(τ+β) Wᵢ V_{i−1} + Λᵢ/(τ+β).
#[allow(clippy::too_many_arguments)]
pub fn u_prox_grad(
    u_old: &Matrix,
    v_prev: &Matrix,
    v_old: &Matrix,
    w: &Matrix,
    dual: &Matrix,
    act: Activation,
    mu: f64,
    beta: f64,
    tau: f64,
) -> Result<Matrix> {
    let s = tau + beta;
    let resid = v_prev.add(&u_old.map(|t| act.eval(t)))?.sub(v_old)?;
    let lin = resid.hadamard(&u_old.map(|t| act.deriv(t)))?;
    let wv = w.matmul(v_prev)?;
    Ok(lin
        .lincomb(-mu / s, u_old, tau / s)?
        .add(&wv.lincomb(beta / s, dual, 1.0 / s)?)?)
}

/// One entry of the separable proximal U subproblem
/// h(u) = μ/2 (a + σ(u) − c)² + β/2 (u − m − l/β)² + ω/2 (u − u⁰)².
#[derive(Debug, Clone, Copy)]
pub struct UEntry {
    pub a: f64,
    pub c: f64,
    pub m: f64,
    pub l: f64,
    pub u0: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct UProx {
    pub act: Activation,
    pub mu: f64,
    pub beta: f64,
    pub omega: f64,
    pub tol: f64,
}

/// Grid cells used to locate every stationary point when h may be nonconvex.
const U_SCAN: usize = 256;
const MAX_DOUBLINGS: usize = 60;

impl UProx {
    pub fn value(&self, e: &UEntry, u: f64) -> f64 {
        let r = e.a + self.act.eval(u) - e.c;
        let p = u - e.m - e.l / self.beta;
        let q = u - e.u0;
        0.5 * self.mu * r * r + 0.5 * self.beta * p * p + 0.5 * self.omega * q * q
    }

    pub fn deriv(&self, e: &UEntry, u: f64) -> f64 {
        let r = e.a + self.act.eval(u) - e.c;
        self.mu * r * self.act.deriv(u) + self.beta * (u - e.m) - e.l + self.omega * (u - e.u0)
    }

    fn deriv2(&self, e: &UEntry, u: f64) -> f64 {
        let s1 = self.act.deriv(u);
        let r = e.a + self.act.eval(u) - e.c;
        self.mu * (s1 * s1 + r * self.act.deriv2(u)) + self.beta + self.omega
    }

    /// Global minimizer of h. The quadratic part is minimized at `center`; all
    /// stationary points lie within `radius` of it, so the bracket is exact
    /// for bounded activations and found by doubling otherwise.
    pub fn solve(&self, e: &UEntry) -> Result<f64> {
        let curv = self.beta + self.omega;
        let center = (self.beta * e.m + e.l + self.omega * e.u0) / curv;
        let mut radius = match self.act.bounds() {
            Some(b) => self.mu * ((e.a - e.c).abs() + b.psi0) * b.psi1 / curv,
            None => 1.0 + center.abs(),
        };
        radius = radius * 1.01 + 1e-12 * (1.0 + center.abs());
        let mut doublings = 0;
        while !(self.deriv(e, center - radius) < 0.0 && self.deriv(e, center + radius) > 0.0) {
            if doublings == MAX_DOUBLINGS {
                return Err(Error::Solver(format!("no sign change around {center} after {MAX_DOUBLINGS} doublings")));
            }
            radius *= 2.0;
            doublings += 1;
        }
        let (lo, hi) = (center - radius, center + radius);
        let convex = match self.act.bounds() {
            // h'' ≥ β + ω − μ(|a − c| + ψ₀)ψ₂.
            Some(b) => curv > self.mu * ((e.a - e.c).abs() + b.psi0) * b.psi2,
            None => true,
        };
        let refine = |l: f64, h: f64| newton_bisect(|u| self.deriv(e, u), |u| self.deriv2(e, u), l, h, e.u0.clamp(l, h), self.tol);
        if convex {
            return Ok(refine(lo, hi));
        }
        let mut best = refine(lo, hi);
        let mut best_val = self.value(e, best);
        let step = (hi - lo) / U_SCAN as f64;
        let mut left = lo;
        let mut d_left = self.deriv(e, left);
        for j in 1..=U_SCAN {
            let right = if j == U_SCAN { hi } else { lo + step * j as f64 };
            let d_right = self.deriv(e, right);
            if d_left < 0.0 && d_right >= 0.0 {
                let u = refine(left, right);
                let v = self.value(e, u);
                if v < best_val {
                    best = u;
                    best_val = v;
                }
            }
            left = right;
            d_left = d_right;
        }
        Ok(best)
    }
}

/// Proximal-point Uᵢ, entry by entry.
#[allow(clippy::too_many_arguments)]
pub fn u_prox_point(
    u_old: &Matrix,
    v_prev: &Matrix,
    v_old: &Matrix,
    w: &Matrix,
    dual: &Matrix,
    prox: &UProx,
) -> Result<Matrix> {
    let wv = w.matmul(v_prev)?;
    let mut out = Matrix::zeros(u_old.rows(), u_old.cols());
    for r in 0..u_old.rows() {
        for c in 0..u_old.cols() {
            let e = UEntry { a: v_prev.get(r, c), c: v_old.get(r, c), m: wv.get(r, c), l: dual.get(r, c), u0: u_old.get(r, c) };
            out.set(r, c, prox.solve(&e)?);
        }
    }
    crate::linalg::flops::add(20 * out.len() as u64);
    Ok(out)
}

/// 3-splitting hidden V (i ≤ N−2):
/// (2μI + β W_{i+1}ᵀW_{i+1})⁻¹ [μ(V_{i−1} + σᵢ(Uᵢ) − σ_{i+1}(U_{i+1}) + V_{i+1}) + W_{i+1}ᵀ(β U_{i+1} − Λ_{i+1})].
#[allow(clippy::too_many_arguments)]
pub fn v_hidden_3s(
    v_prev: &Matrix,
    u: &Matrix,
    u_next: &Matrix,
    v_next: &Matrix,
    w_next: &Matrix,
    dual_next: &Matrix,
    act: Activation,
    act_next: Activation,
    mu: f64,
    beta_next: f64,
) -> Result<Matrix> {
    let mut a = w_next.t_matmul(w_next)?.scale(beta_next);
    a.add_diag(2.0 * mu);
    let local = v_prev
        .add(&u.map(|t| act.eval(t)))?
        .sub(&u_next.map(|t| act_next.eval(t)))?
        .add(v_next)?;
    let rhs = w_next.t_matmul(&u_next.lincomb(beta_next, dual_next, -1.0)?)?.add(&local.scale(mu))?;
    Ok(spd_solve(&a, &rhs)?)
}
