//! Inner loops. The `*_seq` and `*_par` variants compute every output entry
//! with the identical dot-product loop, so they agree bit for bit.
//!
//! The parallel path is compiled with the `rayon` feature and can be switched
//! off at runtime with [`set_parallel`], which the benches use to compare both.

use std::sync::atomic::{AtomicBool, Ordering};

use super::{flops, Matrix};

/// Work (multiply-adds) below which the sequential path is always taken.
pub const PAR_THRESHOLD: usize = 1 << 15;

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "rayon"));

/// Enables or disables the rayon path. A no-op without the `rayon` feature.
pub fn set_parallel(on: bool) {
    PARALLEL.store(on && cfg!(feature = "rayon"), Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.len() {
        acc += a[k] * b[k];
    }
    acc
}

/// `a · btᵀ` where `a` is p×q and `bt` is r×q.
pub fn matmul(a: &Matrix, bt: &Matrix) -> Matrix {
    let (p, q, r) = (a.rows(), a.cols(), bt.rows());
    flops::add(flops::matmul_ops(p, q, r));
    if parallel_enabled() && p * q * r >= PAR_THRESHOLD {
        matmul_par(a, bt)
    } else {
        matmul_seq(a, bt)
    }
}

pub fn matmul_seq(a: &Matrix, bt: &Matrix) -> Matrix {
    let (p, q, r) = (a.rows(), a.cols(), bt.rows());
    debug_assert_eq!(q, bt.cols());
    let mut out = Matrix::zeros(p, r);
    let (ad, bd) = (a.as_slice(), bt.as_slice());
    for (idx, c) in out.as_mut_slice().iter_mut().enumerate() {
        let (i, j) = (idx / r.max(1), idx % r.max(1));
        *c = dot(&ad[i * q..(i + 1) * q], &bd[j * q..(j + 1) * q]);
    }
    out
}

#[cfg(feature = "rayon")]
pub fn matmul_par(a: &Matrix, bt: &Matrix) -> Matrix {
    use rayon::prelude::*;
    let (p, q, r) = (a.rows(), a.cols(), bt.rows());
    debug_assert_eq!(q, bt.cols());
    let mut out = Matrix::zeros(p, r);
    let (ad, bd) = (a.as_slice(), bt.as_slice());
    let min_len = (PAR_THRESHOLD / q.max(1)).max(1);
    out.as_mut_slice()
        .par_iter_mut()
        .with_min_len(min_len)
        .enumerate()
        .for_each(|(idx, c)| {
            let (i, j) = (idx / r.max(1), idx % r.max(1));
            *c = dot(&ad[i * q..(i + 1) * q], &bd[j * q..(j + 1) * q]);
        });
    out
}

#[cfg(not(feature = "rayon"))]
pub fn matmul_par(a: &Matrix, bt: &Matrix) -> Matrix {
    matmul_seq(a, bt)
}

pub fn map<F>(x: &[f64], f: F) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    #[cfg(feature = "rayon")]
    if parallel_enabled() && x.len() >= PAR_THRESHOLD {
        use rayon::prelude::*;
        return x.par_iter().with_min_len(4096).map(|&v| f(v)).collect();
    }
    x.iter().map(|&v| f(v)).collect()
}

pub fn zip<F>(x: &[f64], y: &[f64], f: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    #[cfg(feature = "rayon")]
    if parallel_enabled() && x.len() >= PAR_THRESHOLD {
        use rayon::prelude::*;
        return x
            .par_iter()
            .zip(y.par_iter())
            .with_min_len(4096)
            .map(|(&a, &b)| f(a, b))
            .collect();
    }
    x.iter().zip(y).map(|(&a, &b)| f(a, b)).collect()
}
