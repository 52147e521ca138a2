//! Analytic partial derivatives of the two augmented Lagrangians and the
//! residuals of their KKT systems.

use crate::admm2::{Admm2, Admm2State};
use crate::admm3::{Admm3, Admm3State};
use crate::linalg::{blocks_frob_sq, Matrix};
use crate::Result;

/// Block gradient of L²ˢ.
#[derive(Debug, Clone, PartialEq)]
pub struct Grad2 {
    pub w: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub lambda: Matrix,
}

impl Grad2 {
    pub fn norm(&self) -> f64 {
        (blocks_frob_sq(&self.w) + blocks_frob_sq(&self.v) + self.lambda.frob_sq()).sqrt()
    }
}

/// Block gradient of L³ˢ, or of the auxiliary function when the lag blocks
/// are filled.
#[derive(Debug, Clone, PartialEq)]
pub struct Grad3 {
    pub w: Vec<Matrix>,
    pub u: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub lambda: Vec<Matrix>,
    pub u_lag: Vec<Matrix>,
    pub v_lag: Vec<Matrix>,
}

impl Grad3 {
    pub fn norm(&self) -> f64 {
        [&self.w, &self.u, &self.v, &self.lambda, &self.u_lag, &self.v_lag]
            .iter()
            .map(|b| blocks_frob_sq(b))
            .sum::<f64>()
            .sqrt()
    }
}

/// rᵢ = V_{i−1} + σᵢ(Zᵢ) − Vᵢ, rᵢ ⊙ σᵢ′(Zᵢ), and the output feasibility
/// W_N V_{N−1} − V_N. Zᵢ is WᵢV_{i−1} for 2s and Uᵢ for 3s.
struct Pieces {
    r: Vec<Matrix>,
    rs: Vec<Matrix>,
    feas: Matrix,
}

fn pieces_2s(ctx: &Admm2, s: &Admm2State) -> Result<Pieces> {
    let n = ctx.n_layers();
    let (mut r, mut rs) = (Vec::with_capacity(n - 1), Vec::with_capacity(n - 1));
    for i in 1..n {
        let act = ctx.shape.act(i);
        let vin = s.v_at(ctx.x, i - 1);
        let z = s.w[i - 1].matmul(vin)?;
        let ri = vin.add(&z.map(|t| act.eval(t)))?.sub(&s.v[i - 1])?;
        rs.push(ri.hadamard(&z.map(|t| act.deriv(t)))?);
        r.push(ri);
    }
    let feas = s.w[n - 1].matmul(&s.v[n - 2])?.sub(&s.v[n - 1])?;
    Ok(Pieces { r, rs, feas })
}

fn pieces_3s(ctx: &Admm3, s: &Admm3State) -> Result<Pieces> {
    let n = ctx.n_layers();
    let (mut r, mut rs) = (Vec::with_capacity(n - 1), Vec::with_capacity(n - 1));
    for i in 1..n {
        let act = ctx.shape.act(i);
        let u = &s.u[i - 1];
        let ri = s.v_at(ctx.x, i - 1).add(&u.map(|t| act.eval(t)))?.sub(&s.v[i - 1])?;
        rs.push(ri.hadamard(&u.map(|t| act.deriv(t)))?);
        r.push(ri);
    }
    let feas = s.w[n - 1].matmul(&s.v[n - 2])?.sub(&s.v[n - 1])?;
    Ok(Pieces { r, rs, feas })
}

pub fn grad_l2s(ctx: &Admm2, s: &Admm2State) -> Result<Grad2> {
    let n = ctx.n_layers();
    let h = ctx.hyper;
    let p = pieces_2s(ctx, s)?;
    // β(W_N V_{N−1} − V_N) + Λ
    let coupled = p.feas.axpy(h.beta, &s.lambda)?;
    let mut w = Vec::with_capacity(n);
    for i in 1..n {
        let g = p.rs[i - 1].matmul_t(s.v_at(ctx.x, i - 1))?;
        w.push(s.w[i - 1].lincomb(h.lambda, &g, h.mu)?);
    }
    w.push(s.w[n - 1].lincomb(h.lambda, &coupled.matmul_t(&s.v[n - 2])?, 1.0)?);
    let mut v = Vec::with_capacity(n);
    for i in 1..n - 1 {
        let next = s.w[i].t_matmul(&p.rs[i])?.add(&p.r[i])?;
        v.push(next.lincomb(h.mu, &p.r[i - 1], -h.mu)?);
    }
    v.push(s.w[n - 1].t_matmul(&coupled)?.lincomb(1.0, &p.r[n - 2], -h.mu)?);
    v.push(s.v[n - 1].sub(ctx.y)?.sub(&s.lambda)?.lincomb(1.0, &p.feas, -h.beta)?);
    Ok(Grad2 { w, v, lambda: p.feas })
}

/// Square root of the summed squared norms of the six KKT residual families.
pub fn kkt_residual_2s(ctx: &Admm2, s: &Admm2State) -> Result<f64> {
    let n = ctx.n_layers();
    let h = ctx.hyper;
    let p = pieces_2s(ctx, s)?;
    let mut total = s.w[n - 1].lincomb(h.lambda, &s.lambda.matmul_t(&s.v[n - 2])?, 1.0)?.frob_sq();
    for i in 1..n {
        let g = p.rs[i - 1].matmul_t(s.v_at(ctx.x, i - 1))?;
        total += s.w[i - 1].lincomb(h.lambda, &g, h.mu)?.frob_sq();
    }
    for i in 1..n - 1 {
        let next = s.w[i].t_matmul(&p.rs[i])?.add(&p.r[i])?;
        total += next.lincomb(h.mu, &p.r[i - 1], -h.mu)?.frob_sq();
    }
    total += s.w[n - 1].t_matmul(&s.lambda)?.lincomb(1.0, &p.r[n - 2], -h.mu)?.frob_sq();
    total += s.v[n - 1].sub(ctx.y)?.sub(&s.lambda)?.frob_sq();
    total += p.feas.frob_sq();
    Ok(total.sqrt())
}

pub fn grad_l3s(ctx: &Admm3, s: &Admm3State) -> Result<Grad3> {
    let n = ctx.n_layers();
    let h = ctx.hyper;
    let p = pieces_3s(ctx, s)?;
    // βᵢ(WᵢV_{i−1} − Uᵢ) + Λᵢ, with the last entry for the output constraint.
    let mut feas = Vec::with_capacity(n);
    for i in 1..n {
        feas.push(s.w[i - 1].matmul(s.v_at(ctx.x, i - 1))?.sub(&s.u[i - 1])?);
    }
    feas.push(p.feas);
    let coupled = (1..=n)
        .map(|i| feas[i - 1].axpy(h.beta_at(i), &s.lambda[i - 1]))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut w = Vec::with_capacity(n);
    for i in 1..n {
        w.push(s.w[i - 1].lincomb(h.lambda, &coupled[i - 1].matmul_t(s.v_at(ctx.x, i - 1))?, 1.0)?);
    }
    w.push(s.w[n - 1].lincomb(h.lambda, &coupled[n - 1].matmul_t(&s.v[n - 2])?, 1.0)?);
    let mut u = Vec::with_capacity(n - 1);
    for i in 1..n {
        // μ rᵢ⊙σ′ + βᵢ(Uᵢ − WᵢV_{i−1}) − Λᵢ
        let t = p.rs[i - 1].lincomb(h.mu, &feas[i - 1], -h.beta_at(i))?;
        u.push(t.sub(&s.lambda[i - 1])?);
    }
    let mut v = Vec::with_capacity(n);
    for i in 1..n - 1 {
        let t = s.w[i].t_matmul(&coupled[i])?.lincomb(1.0, &p.r[i], h.mu)?;
        v.push(t.lincomb(1.0, &p.r[i - 1], -h.mu)?);
    }
    v.push(s.w[n - 1].t_matmul(&coupled[n - 1])?.lincomb(1.0, &p.r[n - 2], -h.mu)?);
    v.push(s.v[n - 1].sub(ctx.y)?.sub(&s.lambda[n - 1])?.lincomb(1.0, &feas[n - 1], -h.beta_at(n))?);
    Ok(Grad3 { w, u, v, lambda: feas, u_lag: Vec::new(), v_lag: Vec::new() })
}

/// Gradient of the auxiliary function over (X, U′, V′).
pub fn grad_aux(ctx: &Admm3, s: &Admm3State) -> Result<Grad3> {
    let mut g = grad_l3s(ctx, s)?;
    for i in 1..ctx.n_layers() {
        let (theta, eta) = (ctx.derived.theta[i - 1], ctx.derived.eta[i - 1]);
        let du = s.u[i - 1].sub(&s.u_lag[i - 1])?;
        let dv = s.v[i - 1].sub(&s.v_lag[i - 1])?;
        g.u[i - 1] = du.axpy(2.0 * theta, &g.u[i - 1])?;
        g.v[i - 1] = dv.axpy(2.0 * eta, &g.v[i - 1])?;
        g.u_lag.push(du.scale(-2.0 * theta));
        g.v_lag.push(dv.scale(-2.0 * eta));
    }
    Ok(g)
}

/// Square root of the summed squared norms of the eight KKT residual families.
pub fn kkt_residual_3s(ctx: &Admm3, s: &Admm3State) -> Result<f64> {
    let n = ctx.n_layers();
    let h = ctx.hyper;
    let p = pieces_3s(ctx, s)?;
    let mut total = p.feas.frob_sq();
    total += s.w[n - 1].lincomb(h.lambda, &s.lambda[n - 1].matmul_t(&s.v[n - 2])?, 1.0)?.frob_sq();
    for i in 1..n {
        let vin = s.v_at(ctx.x, i - 1);
        total += s.w[i - 1].matmul(vin)?.sub(&s.u[i - 1])?.frob_sq();
        total += s.w[i - 1].lincomb(h.lambda, &s.lambda[i - 1].matmul_t(vin)?, 1.0)?.frob_sq();
        total += p.rs[i - 1].lincomb(h.mu, &s.lambda[i - 1], -1.0)?.frob_sq();
    }
    for i in 1..n - 1 {
        let t = s.w[i].t_matmul(&s.lambda[i])?.lincomb(1.0, &p.r[i], h.mu)?;
        total += t.lincomb(1.0, &p.r[i - 1], -h.mu)?.frob_sq();
    }
    total += s.w[n - 1].t_matmul(&s.lambda[n - 1])?.lincomb(1.0, &p.r[n - 2], -h.mu)?.frob_sq();
    total += s.v[n - 1].sub(ctx.y)?.sub(&s.lambda[n - 1])?.frob_sq();
    Ok(total.sqrt())
}
