//! Empirical checks of the sufficient-decrease and relative-error conditions,
//! and rate fitting on distance-to-limit series.

use super::TraceRecord;

/// Steps shorter than this are ignored when estimating c₁.
pub const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct B1Report {
    /// Every step decreased the merit by at least −slack.
    pub holds: bool,
    /// min (f(Xᵏ⁻¹) − f(Xᵏ)) / ‖ΔX‖²; infinite when no step was long enough.
    pub c1_hat: f64,
    /// Iteration indices whose merit rose by more than the slack.
    pub violations: Vec<usize>,
}

/// Sufficient decrease over a window: each record's `b1_margin` is the merit
/// drop into that iterate and `delta_x` its step length.
pub fn check_b1(window: &[TraceRecord], slack: f64) -> B1Report {
    let mut c1_hat = f64::INFINITY;
    let mut violations = Vec::new();
    for r in window {
        if !(r.b1_margin >= -slack) {
            violations.push(r.k);
        }
        if r.delta_x >= MIN_STEP {
            c1_hat = c1_hat.min(r.b1_margin / (r.delta_x * r.delta_x));
        }
    }
    B1Report { holds: violations.is_empty(), c1_hat, violations }
}

#[derive(Debug, Clone, PartialEq)]
pub struct B2Report {
    /// Largest finite ratio ‖∇f(Xᵏ)‖/‖ΔXᵏ‖ in the window (0 for an empty window).
    pub c2_hat: f64,
    pub ratios: Vec<f64>,
    /// Iterations that did not move while the gradient was still above `grad_tol`.
    pub stalled: Vec<usize>,
}

impl B2Report {
    pub fn bounded(&self) -> bool {
        self.c2_hat.is_finite() && self.stalled.is_empty()
    }
}

pub fn check_b2(window: &[TraceRecord], grad_tol: f64) -> B2Report {
    let mut c2_hat: f64 = 0.0;
    let mut ratios = Vec::with_capacity(window.len());
    let mut stalled = Vec::new();
    for r in window {
        let ratio = b2_ratio(r.grad_lag, r.delta_x);
        if ratio.is_finite() {
            c2_hat = c2_hat.max(ratio);
        }
        if r.delta_x == 0.0 && r.grad_lag > grad_tol {
            stalled.push(r.k);
        }
        ratios.push(ratio);
    }
    B2Report { c2_hat, ratios, stalled }
}

/// ‖∇f‖/‖ΔX‖ with 0/0 read as 0.
pub fn b2_ratio(grad: f64, delta: f64) -> f64 {
    if delta > 0.0 {
        grad / delta
    } else if grad == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// exp of the slope of log(gap) against k.
    pub eta_hat: f64,
    pub linear_r2: f64,
    /// Slope of log(gap) against log(k).
    pub power_exponent: f64,
    pub power_r2: f64,
    /// Points used (positive gaps only).
    pub points: usize,
}

/// Fits gapₖ ≈ c·ηᵏ and gapₖ ≈ c·kᵖ by least squares in log space, where
/// `gaps[j]` belongs to iteration `first_k + j`. Non-positive gaps are
/// skipped; the power fit also skips k = 0.
pub fn fit_rate(gaps: &[f64], first_k: usize) -> Option<RateFit> {
    let lin: Vec<(f64, f64)> = gaps
        .iter()
        .enumerate()
        .filter(|(_, g)| **g > 0.0 && g.is_finite())
        .map(|(j, g)| ((first_k + j) as f64, g.ln()))
        .collect();
    let pow: Vec<(f64, f64)> = lin.iter().filter(|(k, _)| *k >= 1.0).map(|&(k, l)| (k.ln(), l)).collect();
    let (slope, _, r2) = least_squares(&lin)?;
    let (p_slope, _, p_r2) = least_squares(&pow).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
    Some(RateFit { eta_hat: slope.exp(), linear_r2: r2, power_exponent: p_slope, power_r2: p_r2, points: lin.len() })
}

/// (slope, intercept, r²) of y on x; `None` with fewer than two distinct x.
pub fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some((slope, my - slope * mx, r2))
}

/// Trailing moving average with window `w` (output length len − w + 1).
pub fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    if w == 0 || xs.len() < w {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(xs.len() - w + 1);
    let mut sum: f64 = xs[..w].iter().sum();
    out.push(sum / w as f64);
    for j in w..xs.len() {
        sum += xs[j] - xs[j - w];
        out.push(sum / w as f64);
    }
    out
}
