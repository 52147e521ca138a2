//! Weight initializers with the usual deep-learning conventions: a weight of
//! shape rows×cols has fan_in = cols and fan_out = rows.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::linalg::Matrix;
use crate::model::NetworkShape;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// N(0, 2/fan_in).
    KaimingNormal,
    Constant(f64),
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
    /// N(0, 2/(fan_in + fan_out)).
    XavierNormal,
    Orthogonal,
    /// Each column keeps ⌈sparsity·rows⌉ zeros; other entries N(0, std²).
    Sparse { sparsity: f64, std: f64 },
}

impl Default for Init {
    fn default() -> Self {
        Init::KaimingNormal
    }
}

fn normal_matrix(rows: usize, cols: usize, mean: f64, std: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let dist = Normal::new(mean, std).expect("std is finite and non-negative");
    Matrix::from_fn(rows, cols, |_, _| dist.sample(rng))
}

fn orthogonal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    // Gram-Schmidt on the columns of a tall Gaussian matrix, transposed back if wide.
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let mut cols_v: Vec<Vec<f64>> =
        (0..short).map(|_| (0..tall).map(|_| StandardNormal.sample(rng)).collect()).collect();
    for j in 0..short {
        for p in 0..j {
            let proj: f64 = cols_v[j].iter().zip(&cols_v[p]).map(|(a, b)| a * b).sum();
            let prev = cols_v[p].clone();
            for (a, b) in cols_v[j].iter_mut().zip(&prev) {
                *a -= proj * b;
            }
        }
        let norm = cols_v[j].iter().map(|a| a * a).sum::<f64>().sqrt();
        for a in cols_v[j].iter_mut() {
            *a /= norm;
        }
    }
    let q = Matrix::from_fn(tall, short, |r, c| cols_v[c][r]);
    if rows >= cols {
        q
    } else {
        q.transpose()
    }
}

impl Init {
    pub fn matrix(&self, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let (fan_in, fan_out) = (cols as f64, rows as f64);
        match *self {
            Init::KaimingNormal => normal_matrix(rows, cols, 0.0, (2.0 / fan_in).sqrt(), rng),
            Init::Constant(c) => Matrix::filled(rows, cols, c),
            Init::Normal { mean, std } => normal_matrix(rows, cols, mean, std, rng),
            Init::Uniform { low, high } => Matrix::from_fn(rows, cols, |_, _| rng.random_range(low..high)),
            Init::XavierNormal => normal_matrix(rows, cols, 0.0, (2.0 / (fan_in + fan_out)).sqrt(), rng),
            Init::Orthogonal => orthogonal(rows, cols, rng),
            Init::Sparse { sparsity, std } => {
                let mut m = normal_matrix(rows, cols, 0.0, std, rng);
                let zeros = ((sparsity * rows as f64).ceil() as usize).min(rows);
                for c in 0..cols {
                    for r in sample(rng, rows, zeros) {
                        m.set(r, c, 0.0);
                    }
                }
                m
            }
        }
    }

    /// W₁..W_N for `shape`, drawn in layer order from one seeded stream.
    pub fn weights(&self, shape: &NetworkShape, seed: u64) -> Vec<Matrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (1..=shape.n_layers)
            .map(|i| {
                let (r, c) = shape.weight_shape(i);
                self.matrix(r, c, &mut rng)
            })
            .collect()
    }
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Init::KaimingNormal => write!(f, "kaiming_normal"),
            Init::Constant(c) => write!(f, "constant:{c}"),
            Init::Normal { mean, std } => write!(f, "normal:{mean}:{std}"),
            Init::Uniform { low, high } => write!(f, "uniform:{low}:{high}"),
            Init::XavierNormal => write!(f, "xavier_normal"),
            Init::Orthogonal => write!(f, "orthogonal"),
            Init::Sparse { sparsity, std } => write!(f, "sparse:{sparsity}:{std}"),
        }
    }
}

impl FromStr for Init {
    type Err = Error;

    /// `kaiming_normal`, `constant[:c]`, `normal[:mean:std]`, `uniform[:low:high]`,
    /// `xavier_normal`, `orthogonal`, `sparse[:sparsity:std]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default().to_ascii_lowercase();
        let args = parts
            .map(|p| p.parse::<f64>().map_err(|e| Error::Parse(format!("init argument `{p}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        let arg = |i: usize, default: f64| args.get(i).copied().unwrap_or(default);
        let init = match name.as_str() {
            "kaiming_normal" | "kaiming" => Init::KaimingNormal,
            "constant" => Init::Constant(arg(0, 0.1)),
            "normal" => Init::Normal { mean: arg(0, 0.0), std: arg(1, 0.1) },
            "uniform" => Init::Uniform { low: arg(0, 0.0), high: arg(1, 1.0) },
            "xavier_normal" | "xavier" => Init::XavierNormal,
            "orthogonal" => Init::Orthogonal,
            "sparse" => Init::Sparse { sparsity: arg(0, 0.1), std: arg(1, 0.01) },
            other => return Err(Error::Parse(format!("unknown init `{other}`"))),
        };
        match init {
            Init::Normal { std, .. } | Init::Sparse { std, .. } if !(std >= 0.0) => {
                Err(Error::Parse(format!("init std must be non-negative in `{s}`")))
            }
            Init::Uniform { low, high } if !(low < high) => {
                Err(Error::Parse(format!("uniform init needs low < high in `{s}`")))
            }
            Init::Sparse { sparsity, .. } if !(0.0..=1.0).contains(&sparsity) => {
                Err(Error::Parse(format!("sparsity must lie in [0, 1] in `{s}`")))
            }
            _ => Ok(init),
        }
    }
}
