#![allow(dead_code)]

use fcresnet_admm::linalg::Matrix;
use fcresnet_admm::model::{Activation, Dataset, Init, NetworkShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn s(v: f64) -> Matrix {
    Matrix::scalar(v)
}

/// Golden-section minimization on [a, b].
pub fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    // Golden section alone stalls near sqrt(eps); one parabolic step through
    // nearby points recovers the digits lost to flat function values.
    let x = 0.5 * (a + b);
    let h = 1e-5 * x.abs().max(1.0);
    let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
    let curv = fp - 2.0 * f0 + fm;
    if curv > 0.0 {
        let step = h * (fp - fm) / (2.0 * curv);
        if step.abs() <= h {
            return x - step;
        }
    }
    x
}

/// Dense grid over [lo, hi] followed by golden section around the best cell.
pub fn grid_golden(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> f64 {
    let h = (hi - lo) / cells as f64;
    let best = (0..=cells)
        .map(|j| lo + j as f64 * h)
        .min_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap())
        .unwrap();
    golden(&f, best - h, best + h, 1e-12)
}

/// Cyclic coordinate minimization by golden section; for the strongly convex
/// quadratic subproblems of the closed-form updates.
pub fn coordinate_min(f: impl Fn(&Matrix) -> f64, x0: &Matrix, radius: f64, sweeps: usize) -> Matrix {
    let mut x = x0.clone();
    for _ in 0..sweeps {
        for r in 0..x.rows() {
            for c in 0..x.cols() {
                let center = x.get(r, c);
                let t = golden(
                    |t| {
                        let mut y = x.clone();
                        y.set(r, c, t);
                        f(&y)
                    },
                    center - radius,
                    center + radius,
                    1e-13,
                );
                x.set(r, c, t);
            }
        }
    }
    x
}

/// Central finite-difference gradient.
pub fn fd_grad(f: impl Fn(&Matrix) -> f64, x: &Matrix, h: f64) -> Matrix {
    let mut g = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        for c in 0..x.cols() {
            let mut p = x.clone();
            p.set(r, c, x.get(r, c) + h);
            let mut m = x.clone();
            m.set(r, c, x.get(r, c) - h);
            g.set(r, c, (f(&p) - f(&m)) / (2.0 * h));
        }
    }
    g
}

/// ‖a − b‖ / max(1, ‖b‖).
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).unwrap().frob_norm() / b.frob_norm().max(1.0)
}

/// A small network and dataset with Kaiming-normal weights.
pub fn tiny(n_layers: usize, d: usize, q: usize, n: usize, act: Activation, seed: u64) -> (NetworkShape, Dataset, Vec<Matrix>) {
    let shape = NetworkShape::uniform(n_layers, d, q, act).unwrap();
    let mut r = rng(seed);
    let x = rand_matrix(&mut r, d, n, 1.0);
    let y = rand_matrix(&mut r, q, n, 1.0);
    let data = Dataset::new(x, y).unwrap();
    let w = Init::KaimingNormal.weights(&shape, seed + 1);
    (shape, data, w)
}

pub fn smooth_acts() -> [Activation; 3] {
    [Activation::Sigmoid, Activation::Tanh, Activation::Sin]
}
