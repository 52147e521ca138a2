//! Thread-local operation counter.
//!
//! Kernels add their schoolbook count on the calling thread before any rayon
//! fan-out, so a worker thread sees exactly the operations it requested.

use std::cell::Cell;

thread_local! {
    static COUNT: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub fn add(ops: u64) {
    COUNT.with(|c| c.set(c.get().wrapping_add(ops)));
}

pub fn count() -> u64 {
    COUNT.with(Cell::get)
}

pub fn reset() {
    COUNT.with(|c| c.set(0));
}

/// Runs `f` and returns its result together with the operations it performed.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let before = count();
    let out = f();
    (out, count().wrapping_sub(before))
}

/// p·r·(2q−1) for a p×q by q×r product.
pub fn matmul_ops(p: usize, q: usize, r: usize) -> u64 {
    if q == 0 {
        return 0;
    }
    (p * r * (2 * q - 1)) as u64
}
