use super::{flops, LinalgError, Matrix, Result};

/// Square-root-free factorization `A = L D Lᵀ` with unit lower-triangular `L`.
///
/// Avoiding square roots keeps exactly representable systems (diagonal ones
/// in particular) exact.
#[derive(Debug, Clone)]
pub struct Cholesky {
    /// Strictly lower part holds `L`; the diagonal holds `D`.
    ld: Matrix,
}

pub fn cholesky(a: &Matrix) -> Result<Cholesky> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::Shape { op: "cholesky", left: a.shape(), right: a.shape() });
    }
    let scale = 1.0 + a.max_abs();
    for r in 0..n {
        for c in r + 1..n {
            let gap = (a.get(r, c) - a.get(c, r)).abs();
            if gap > 1e-12 * scale {
                return Err(LinalgError::NotSymmetric { row: r, col: c, gap });
            }
        }
    }
    let mut ld = Matrix::zeros(n, n);
    // Row j of L scaled by D, reused across the column loop.
    let mut ldj = vec![0.0; n];
    let mut ops = 0u64;
    for j in 0..n {
        for k in 0..j {
            ldj[k] = ld.get(j, k) * ld.get(k, k);
        }
        let mut s = a.get(j, j);
        for k in 0..j {
            s -= ld.get(j, k) * ldj[k];
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { pivot: j, value: s });
        }
        ld.set(j, j, s);
        for i in j + 1..n {
            let mut t = a.get(i, j);
            for k in 0..j {
                t -= ld.get(i, k) * ldj[k];
            }
            ld.set(i, j, t / s);
        }
        ops += ((n - j) * (2 * j + 1)) as u64;
    }
    flops::add(ops);
    Ok(Cholesky { ld })
}

impl Cholesky {
    /// The lower-triangular `L√D` with `A = (L√D)(L√D)ᵀ`.
    pub fn factor(&self) -> Matrix {
        let n = self.ld.rows();
        Matrix::from_fn(n, n, |r, c| match r.cmp(&c) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => self.ld.get(r, r).sqrt(),
            std::cmp::Ordering::Greater => self.ld.get(r, c) * self.ld.get(c, c).sqrt(),
        })
    }

    /// Solves `A X = B` column by column: forward substitution, diagonal
    /// scaling, back substitution.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        let n = self.ld.rows();
        if b.rows() != n {
            return Err(LinalgError::Shape { op: "spd_solve", left: self.ld.shape(), right: b.shape() });
        }
        let m = b.cols();
        let mut x = b.clone();
        let ld = &self.ld;
        for col in 0..m {
            for i in 0..n {
                let mut s = x.get(i, col);
                for k in 0..i {
                    s -= ld.get(i, k) * x.get(k, col);
                }
                x.set(i, col, s);
            }
            for i in (0..n).rev() {
                let mut s = x.get(i, col) / ld.get(i, i);
                for k in i + 1..n {
                    s -= ld.get(k, i) * x.get(k, col);
                }
                x.set(i, col, s);
            }
        }
        flops::add((2 * n * n * m) as u64);
        Ok(x)
    }
}

/// Solves `A X = B` for symmetric positive definite `A`.
pub fn spd_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    cholesky(a)?.solve(b)
}
