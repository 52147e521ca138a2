//! Inner solvers for the proximal-point subproblems.

use log::warn;

use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    /// Stop once the gradient Frobenius norm is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo_c: f64,
    /// Backtracking factor.
    pub shrink: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500, armijo_c: 1e-4, shrink: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerReport {
    pub iterations: usize,
    pub grad_norm: f64,
    pub start_value: f64,
    pub value: f64,
    pub converged: bool,
}

/// Running tally of inner solves inside one outer step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InnerStats {
    pub solves: usize,
    pub unconverged: usize,
    pub iterations: usize,
    pub worst_grad: f64,
}

impl InnerStats {
    pub fn record(&mut self, r: &InnerReport) {
        self.solves += 1;
        self.iterations += r.iterations;
        if !r.converged {
            self.unconverged += 1;
        }
        self.worst_grad = self.worst_grad.max(r.grad_norm);
    }

    pub fn merge(&mut self, other: &InnerStats) {
        self.solves += other.solves;
        self.unconverged += other.unconverged;
        self.iterations += other.iterations;
        self.worst_grad = self.worst_grad.max(other.worst_grad);
    }
}

/// Gradient descent with Armijo backtracking from the warm start `x0`.
///
/// The trial step is the Barzilai-Borwein length when the last step had
/// positive curvature. The returned point never has a larger objective than
/// `x0`; if the budget runs out the best iterate is returned with
/// `converged = false`.
pub fn minimize<F>(x0: &Matrix, cfg: &InnerConfig, mut f: F) -> Result<(Matrix, InnerReport)>
where
    F: FnMut(&Matrix) -> Result<(f64, Matrix)>,
{
    let (f0, g0) = f(x0)?;
    if !f0.is_finite() {
        return Err(Error::Solver(format!("non-finite objective {f0} at warm start")));
    }
    let mut x = x0.clone();
    let (mut fx, mut g) = (f0, g0);
    let mut gn2 = g.frob_sq();
    let mut step = 1.0;
    let mut iters = 0;
    while gn2.sqrt() > cfg.tol && iters < cfg.max_iter {
        iters += 1;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..80 {
            let trial = g.axpy(-t, &x)?;
            let (ft, gt) = f(&trial)?;
            let armijo = ft <= fx - cfg.armijo_c * t * gn2;
            // Near the optimum the decrease drops below rounding; accept
            // steps that shrink the gradient without a measurable increase.
            let flat = ft <= fx + 4.0 * f64::EPSILON * fx.abs() && gt.frob_sq() < gn2;
            if ft.is_finite() && (armijo || flat) {
                accepted = Some((trial, ft, gt));
                break;
            }
            t *= cfg.shrink;
        }
        let Some((xn, fnew, gnew)) = accepted else { break };
        let s = xn.sub(&x)?;
        let yv = gnew.sub(&g)?;
        let sy = s.inner(&yv)?;
        step = if sy > 0.0 { (s.frob_sq() / sy).min(1e12) } else { (t * 2.0).min(1e12) };
        x = xn;
        fx = fnew;
        g = gnew;
        gn2 = g.frob_sq();
    }
    if fx > f0 {
        let r = InnerReport { iterations: iters, grad_norm: g0_norm(x0, &mut f)?, start_value: f0, value: f0, converged: false };
        return Ok((x0.clone(), r));
    }
    let converged = gn2.sqrt() <= cfg.tol;
    if !converged {
        warn!("inner solver stopped after {iters} iterations with gradient norm {:.3e}", gn2.sqrt());
    }
    Ok((x, InnerReport { iterations: iters, grad_norm: gn2.sqrt(), start_value: f0, value: fx, converged }))
}

fn g0_norm<F>(x0: &Matrix, f: &mut F) -> Result<f64>
where
    F: FnMut(&Matrix) -> Result<(f64, Matrix)>,
{
    Ok(f(x0)?.1.frob_norm())
}

/// Minimizes a scalar function on `[lo, hi]` given its derivative `dh` and
/// second derivative `ddh`, assuming `dh(lo) < 0 < dh(hi)`.
///
/// Newton steps are taken when they stay inside the shrinking bracket,
/// bisection otherwise. Returns a point with `|dh| ≤ tol` or a bracket
/// narrower than rounding.
pub fn newton_bisect(
    dh: impl Fn(f64) -> f64,
    ddh: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    start: f64,
    tol: f64,
) -> f64 {
    let mut u = start.clamp(lo, hi);
    for _ in 0..200 {
        let g = dh(u);
        if g.abs() <= tol {
            return u;
        }
        if g < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + u.abs()) {
            return u;
        }
        let h = ddh(u);
        let newton = if h > 0.0 { u - g / h } else { f64::NAN };
        u = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_converges() {
        // f(X) = ½‖A∘X − B‖² with a diagonal-scaling A.
        let a = Matrix::from_rows(&[&[1.0, 10.0], &[0.5, 3.0]]).unwrap();
        let b = Matrix::from_rows(&[&[1.0, -2.0], &[4.0, 0.0]]).unwrap();
        let f = |x: &Matrix| {
            let r = a.hadamard(x)?.sub(&b)?;
            Ok((0.5 * r.frob_sq(), r.hadamard(&a)?))
        };
        let (x, rep) = minimize(&Matrix::zeros(2, 2), &InnerConfig::default(), f).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!((x.get(0, 1) + 0.2).abs() < 1e-8);
        assert!(rep.value <= rep.start_value);
    }

    #[test]
    fn stationary_warm_start_is_returned() {
        let f = |x: &Matrix| Ok((0.5 * x.frob_sq(), x.clone()));
        let (x, rep) = minimize(&Matrix::zeros(1, 3), &InnerConfig::default(), f).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(x, Matrix::zeros(1, 3));
    }

    #[test]
    fn newton_bisect_finds_root() {
        let u = newton_bisect(|u| u.powi(3) + u - 3.0, |u| 3.0 * u * u + 1.0, -10.0, 10.0, 0.0, 1e-12);
        assert!((u.powi(3) + u - 3.0).abs() <= 1e-12);
    }
}
