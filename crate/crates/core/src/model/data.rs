use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Column j of `x` and `y` is one sample pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.cols() != y.cols() {
            return Err(Error::Shape(format!("X has {} samples, Y has {}", x.cols(), y.cols())));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.cols()
    }

    pub fn d(&self) -> usize {
        self.x.rows()
    }

    pub fn q(&self) -> usize {
        self.y.rows()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset { x: self.x.select_columns(idx), y: self.y.select_columns(idx) }
    }

    /// Splits into consecutive batches of at most `batch` samples, in column order.
    pub fn batches(&self, batch: usize) -> Vec<Dataset> {
        let idx: Vec<usize> = (0..self.n()).collect();
        idx.chunks(batch.max(1)).map(|c| self.select(c)).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let header: Vec<String> = (1..=self.d())
            .map(|i| format!("x_{i}"))
            .chain((1..=self.q()).map(|i| format!("y_{i}")))
            .collect();
        out.write_record(&header)?;
        for j in 0..self.n() {
            let row: Vec<String> = self
                .x
                .column(j)
                .into_iter()
                .chain(self.y.column(j))
                .map(|v| format!("{v:?}"))
                .collect();
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let d = headers.iter().filter(|h| h.starts_with("x_")).count();
        let q = headers.iter().filter(|h| h.starts_with("y_")).count();
        if d == 0 || q == 0 || d + q != headers.len() {
            return Err(Error::Parse(format!("dataset header must be x_1..x_d,y_1..y_q, got {headers:?}")));
        }
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            cols.push(row);
        }
        let n = cols.len();
        let x = Matrix::from_fn(d, n, |r, j| cols[j][r]);
        let y = Matrix::from_fn(q, n, |r, j| cols[j][d + r]);
        Dataset::new(x, y)
    }
}

fn uniform_inputs(d: usize, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    // Column-major draw order so sample j depends only on the first j draws.
    let mut x = Matrix::zeros(d, n);
    for j in 0..n {
        for r in 0..d {
            x.set(r, j, rng.random_range(-2.0..2.0));
        }
    }
    x
}

/// Inputs uniform on [−2, 2)^d, target ‖x‖₁.
pub fn gen_l1(d: usize, n: usize, seed: u64) -> Result<Dataset> {
    if d == 0 {
        return Err(Error::Shape("gen_l1 needs d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform_inputs(d, n, &mut rng);
    let y = Matrix::from_fn(1, n, |_, j| (0..d).map(|r| x.get(r, j).abs()).sum());
    Dataset::new(x, y)
}

/// Piecewise oscillation target.
///
/// All coordinates ≤ −1: x₁x₂²x₃x₄²… (odd positions linear, even squared).
/// Any coordinate > 1: x₁²x₂x₃²x₄… (odd squared, even linear).
/// Otherwise: the product of all squares.
pub fn oscillation(x: &[f64]) -> f64 {
    let pattern = |odd_power: i32, even_power: i32| {
        x.iter()
            .enumerate()
            .map(|(i, v)| v.powi(if i % 2 == 0 { odd_power } else { even_power }))
            .product::<f64>()
    };
    if x.iter().all(|&v| v <= -1.0) {
        pattern(1, 2)
    } else if x.iter().any(|&v| v > 1.0) {
        pattern(2, 1)
    } else {
        pattern(2, 2)
    }
}

pub fn gen_oscillation(d: usize, n: usize, seed: u64) -> Result<Dataset> {
    if d == 0 {
        return Err(Error::Shape("gen_oscillation needs d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform_inputs(d, n, &mut rng);
    let y = Matrix::from_fn(1, n, |_, j| oscillation(&x.column(j)));
    Dataset::new(x, y)
}

/// Seeded shuffle, then the first ⌊ratio·n⌋ samples train and the rest test.
pub fn split_train_test(ds: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidHyper(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..ds.n()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (ratio * ds.n() as f64).floor() as usize;
    Ok((ds.select(&idx[..cut]), ds.select(&idx[cut..])))
}
