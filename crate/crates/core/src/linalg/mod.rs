//! Dense row-major matrices and the handful of kernels the trainers need.
//!
//! Every product uses the same per-entry accumulation order (k innermost), so
//! results do not depend on whether the rayon path or the sequential path ran.

mod cholesky;
pub mod flops;
pub mod kernel;

pub use cholesky::{cholesky, spd_solve, Cholesky};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("data length {len} does not match {rows}x{cols}")]
    Length { rows: usize, cols: usize, len: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::Length { rows, cols, len: data.len() });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite { row: idx / cols.max(1), col: idx % cols.max(1) });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(LinalgError::Length { rows: r, cols: c, len: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    pub fn scalar(v: f64) -> Self {
        Self { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Copies the listed columns, in order, into a new matrix.
    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, idx.len(), |r, j| self.get(r, idx[j]))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    fn same_shape(&self, other: &Matrix, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(LinalgError::Shape { op, left: self.shape(), right: other.shape() });
        }
        Ok(())
    }

    /// `self · b`.
    pub fn matmul(&self, b: &Matrix) -> Result<Matrix> {
        if self.cols != b.rows {
            return Err(LinalgError::Shape { op: "matmul", left: self.shape(), right: b.shape() });
        }
        Ok(kernel::matmul(self, &b.transpose()))
    }

    /// `selfᵀ · b` without materialising the transpose of `self` twice.
    pub fn t_matmul(&self, b: &Matrix) -> Result<Matrix> {
        if self.rows != b.rows {
            return Err(LinalgError::Shape { op: "t_matmul", left: self.shape(), right: b.shape() });
        }
        Ok(kernel::matmul(&self.transpose(), &b.transpose()))
    }

    /// `self · bᵀ`.
    pub fn matmul_t(&self, b: &Matrix) -> Result<Matrix> {
        if self.cols != b.cols {
            return Err(LinalgError::Shape { op: "matmul_t", left: self.shape(), right: b.shape() });
        }
        Ok(kernel::matmul(self, b))
    }

    pub fn hadamard(&self, b: &Matrix) -> Result<Matrix> {
        self.same_shape(b, "hadamard")?;
        Ok(self.zip_with(b, |x, y| x * y))
    }

    pub fn add(&self, b: &Matrix) -> Result<Matrix> {
        self.same_shape(b, "add")?;
        Ok(self.zip_with(b, |x, y| x + y))
    }

    pub fn sub(&self, b: &Matrix) -> Result<Matrix> {
        self.same_shape(b, "sub")?;
        Ok(self.zip_with(b, |x, y| x - y))
    }

    /// `alpha · self + b`.
    pub fn axpy(&self, alpha: f64, b: &Matrix) -> Result<Matrix> {
        self.same_shape(b, "axpy")?;
        Ok(self.zip_with(b, |x, y| alpha * x + y))
    }

    /// `alpha · self + beta · b`.
    pub fn lincomb(&self, alpha: f64, b: &Matrix, beta: f64) -> Result<Matrix> {
        self.same_shape(b, "lincomb")?;
        Ok(self.zip_with(b, |x, y| alpha * x + beta * y))
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        self.map(|x| alpha * x)
    }

    pub fn map<F>(&self, f: F) -> Matrix
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        flops::add(self.data.len() as u64);
        Matrix { rows: self.rows, cols: self.cols, data: kernel::map(&self.data, f) }
    }

    /// Entrywise binary map; callers check shapes.
    pub fn zip_with<F>(&self, b: &Matrix, f: F) -> Matrix
    where
        F: Fn(f64, f64) -> f64 + Sync + Send,
    {
        debug_assert_eq!(self.shape(), b.shape());
        flops::add(self.data.len() as u64);
        Matrix { rows: self.rows, cols: self.cols, data: kernel::zip(&self.data, &b.data, f) }
    }

    pub fn add_assign(&mut self, b: &Matrix) -> Result<()> {
        self.same_shape(b, "add_assign")?;
        flops::add(self.data.len() as u64);
        for (x, y) in self.data.iter_mut().zip(&b.data) {
            *x += y;
        }
        Ok(())
    }

    /// Adds `alpha` to every diagonal entry of a square matrix.
    pub fn add_diag(&mut self, alpha: f64) {
        let n = self.rows.min(self.cols);
        flops::add(n as u64);
        for i in 0..n {
            self.data[i * self.cols + i] += alpha;
        }
    }

    pub fn frob_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_sq().sqrt()
    }

    /// `⟨A, B⟩ = tr(A Bᵀ)`.
    pub fn inner(&self, b: &Matrix) -> Result<f64> {
        self.same_shape(b, "inner")?;
        Ok(self.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
    }

    pub fn max_abs_diff(&self, b: &Matrix) -> Result<f64> {
        self.same_shape(b, "max_abs_diff")?;
        Ok(self.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Squared Frobenius distance; convenience for diagnostics.
    pub fn dist_sq(&self, b: &Matrix) -> Result<f64> {
        self.same_shape(b, "dist_sq")?;
        Ok(self.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum())
    }
}

/// Sum of squared Frobenius norms over a list of blocks.
pub fn blocks_frob_sq(blocks: &[Matrix]) -> f64 {
    blocks.iter().map(Matrix::frob_sq).sum()
}
