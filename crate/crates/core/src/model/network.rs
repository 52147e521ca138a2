use crate::linalg::Matrix;
use crate::model::Activation;
use crate::{Error, Result};

/// Layer count `n_layers` (N ≥ 2), hidden width `d`, output width `q`, and the
/// N−1 hidden activations. W₁..W_{N−1} are d×d and W_N is q×d.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkShape {
    pub n_layers: usize,
    pub d: usize,
    pub q: usize,
    pub activations: Vec<Activation>,
}

impl NetworkShape {
    pub fn new(n_layers: usize, d: usize, q: usize, activations: Vec<Activation>) -> Result<Self> {
        if n_layers < 2 {
            return Err(Error::Shape(format!("need at least 2 layers, got {n_layers}")));
        }
        if d == 0 || q == 0 {
            return Err(Error::Shape(format!("widths must be positive (d={d}, q={q})")));
        }
        if activations.len() != n_layers - 1 {
            return Err(Error::Shape(format!(
                "{} activations for {} hidden layers",
                activations.len(),
                n_layers - 1
            )));
        }
        Ok(Self { n_layers, d, q, activations })
    }

    pub fn uniform(n_layers: usize, d: usize, q: usize, act: Activation) -> Result<Self> {
        Self::new(n_layers, d, q, vec![act; n_layers.saturating_sub(1)])
    }

    /// σᵢ for 1-based layer `i < N`.
    #[inline]
    pub fn act(&self, i: usize) -> Activation {
        self.activations[i - 1]
    }

    /// Shape of Wᵢ for 1-based `i`.
    pub fn weight_shape(&self, i: usize) -> (usize, usize) {
        if i == self.n_layers {
            (self.q, self.d)
        } else {
            (self.d, self.d)
        }
    }

    pub fn check_weights(&self, weights: &[Matrix]) -> Result<()> {
        if weights.len() != self.n_layers {
            return Err(Error::Shape(format!("{} weight matrices for N={}", weights.len(), self.n_layers)));
        }
        for (i, w) in weights.iter().enumerate() {
            let want = self.weight_shape(i + 1);
            if w.shape() != want {
                return Err(Error::Shape(format!("W_{} is {:?}, expected {want:?}", i + 1, w.shape())));
            }
        }
        Ok(())
    }

    pub fn check_data(&self, x: &Matrix, y: &Matrix) -> Result<()> {
        if x.rows() != self.d || y.rows() != self.q || x.cols() != y.cols() {
            return Err(Error::Shape(format!(
                "data X {:?}, Y {:?} incompatible with d={}, q={}",
                x.shape(),
                y.shape(),
                self.d,
                self.q
            )));
        }
        Ok(())
    }

    pub fn weight_entries(&self) -> usize {
        (self.n_layers - 1) * self.d * self.d + self.q * self.d
    }
}

/// Hidden states V₀..V_N with V₀ = X, Vᵢ = V_{i−1} + σᵢ(WᵢV_{i−1}), V_N = W_N V_{N−1}.
pub fn forward(weights: &[Matrix], shape: &NetworkShape, x: &Matrix) -> Result<Vec<Matrix>> {
    shape.check_weights(weights)?;
    if x.rows() != shape.d {
        return Err(Error::Shape(format!("X has {} rows, expected d={}", x.rows(), shape.d)));
    }
    let n = shape.n_layers;
    let mut vs = Vec::with_capacity(n + 1);
    vs.push(x.clone());
    for i in 1..n {
        let act = shape.act(i);
        let z = weights[i - 1].matmul(&vs[i - 1])?;
        let next = vs[i - 1].add(&z.map(|t| act.eval(t)))?;
        vs.push(next);
    }
    let out = weights[n - 1].matmul(&vs[n - 1])?;
    vs.push(out);
    Ok(vs)
}

pub fn predict(weights: &[Matrix], shape: &NetworkShape, x: &Matrix) -> Result<Matrix> {
    Ok(forward(weights, shape, x)?.pop().expect("forward returns N+1 states"))
}

/// ½‖V_N − Y‖² + (λ/2)Σ‖Wᵢ‖².
pub fn objective(weights: &[Matrix], shape: &NetworkShape, x: &Matrix, y: &Matrix, lambda: f64) -> Result<f64> {
    let pred = predict(weights, shape, x)?;
    let fit = pred.dist_sq(y).map_err(Error::from)?;
    let reg: f64 = weights.iter().map(Matrix::frob_sq).sum();
    Ok(0.5 * fit + 0.5 * lambda * reg)
}

/// (1/n) Σⱼ ‖pred_j − y_j‖².
pub fn mse(pred: &Matrix, y: &Matrix) -> Result<f64> {
    let n = pred.cols();
    if n == 0 {
        return Err(Error::Shape("mse over zero samples".into()));
    }
    Ok(pred.dist_sq(y)? / n as f64)
}
