//! Operation counts of each block update and memory totals, under a
//! schoolbook model of the basic matrix operations.

use std::fmt;

use crate::Result;
use crate::Error;

/// Basic-operation counts of the primitive matrix operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostModel {
    /// pr(2q−1) per p×q by q×r product, n³ per inverse.
    #[default]
    Schoolbook,
}

impl CostModel {
    pub fn mul(self, p: u64, q: u64, r: u64) -> u64 {
        match self {
            CostModel::Schoolbook => p * r * (2 * q).saturating_sub(1),
        }
    }

    pub fn mul_sq(self, n: u64) -> u64 {
        self.mul(n, n, n)
    }

    pub fn inv(self, n: u64) -> u64 {
        n * n * n
    }

    pub fn elewise(self, p: u64, q: u64) -> u64 {
        p * q
    }

    pub fn hadamard(self, p: u64, q: u64) -> u64 {
        p * q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block2 {
    WN,
    Wi,
    Vi,
    VN1,
    VN,
    Lambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block3 {
    WN,
    Wi,
    Ui,
    Vi,
    VN1,
    VN,
    LambdaI,
    LambdaN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Splitting {
    Two,
    Three,
}

impl Splitting {
    pub fn name(self) -> &'static str {
        match self {
            Splitting::Two => "2s",
            Splitting::Three => "3s",
        }
    }
}

impl fmt::Display for Splitting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Splitting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2s" | "2" | "two" => Ok(Splitting::Two),
            "3s" | "3" | "three" => Ok(Splitting::Three),
            _ => Err(Error::Parse(format!("unknown splitting '{s}' (expected 2s or 3s)"))),
        }
    }
}

/// Operation count of one 2-splitting block update (proximal-gradient variant).
pub fn cost_2s_update(block: Block2, d: u64, q: u64, n: u64, m: CostModel) -> u64 {
    match block {
        Block2::WN => m.mul(d, n, d) + m.inv(d) + m.mul(q, d, d) + 2 * m.mul(q, n, d) + 2 * q * d + 2 * d * d + d,
        Block2::Wi => {
            2 * m.mul(d, d, n) + m.mul(d, n, d) + m.hadamard(d, n) + 2 * m.elewise(d, n) + 2 * d * n + 3 * d * d + 4
        }
        Block2::Vi => 5 * m.mul(d, d, n) + m.hadamard(d, n) + 4 * m.elewise(d, n) + 10 * d * n + d * d + 6,
        Block2::VN1 => {
            2 * m.mul(d, d, n)
                + 2 * m.mul(d, d, q)
                + 3 * m.mul(d, q, d)
                + 2 * m.mul(d, q, n)
                + 3 * m.inv(d)
                + m.elewise(d, n)
                + 3 * d * n
                + 3 * d * d
                + 3 * d * q
                + 2 * d * d
                + 3 * d
        }
        Block2::VN => m.mul(q, d, n) + 3 * q * n + q * d + 2,
        Block2::Lambda => m.mul(q, d, n) + 3 * q * n,
    }
}

/// Operation count of one 3-splitting block update (proximal-gradient variant).
pub fn cost_3s_update(block: Block3, d: u64, q: u64, n: u64, m: CostModel) -> u64 {
    match block {
        Block3::WN => m.mul(d, n, d) + 2 * m.mul(q, n, d) + m.inv(d) + m.mul(q, d, d) + 2 * q * d + 2 * d * d + d,
        Block3::Wi => 3 * m.mul(d, n, d) + m.inv(d) + m.mul_sq(d) + 4 * d * d + d,
        Block3::Vi => {
            3 * m.mul(d, d, n)
                + 5 * m.mul_sq(d)
                + 2 * m.elewise(d, n)
                + 3 * m.inv(d)
                + 5 * d * n
                + 8 * d * d
                + 3 * d
                + 3
        }
        Block3::Ui => m.mul(d, d, n) + m.hadamard(d, n) + 2 * m.elewise(d, n) + 8 * d * n + d * d + 8,
        Block3::VN1 => {
            3 * m.mul(d, q, d)
                + m.mul(d, d, n)
                + 2 * m.mul(d, d, q)
                + 2 * m.mul(d, q, n)
                + 3 * m.inv(d)
                + m.elewise(d, n)
                + 3 * d * n
                + 3 * d * d
                + 3 * d * q
                + 2 * d * d
                + 3 * d
        }
        Block3::VN => m.mul(q, d, n) + 3 * q * n + q * d + 2,
        Block3::LambdaI => m.mul(d, d, n) + 3 * d * n,
        Block3::LambdaN => m.mul(q, d, n) + 3 * q * n,
    }
}

/// Operations of one full serial cycle.
pub fn cycle_ops(splitting: Splitting, n_layers: u64, d: u64, q: u64, n: u64, m: CostModel) -> u64 {
    let hidden = n_layers - 1;
    let inner_v = n_layers.saturating_sub(2);
    match splitting {
        Splitting::Two => {
            let c = |b| cost_2s_update(b, d, q, n, m);
            c(Block2::WN) + hidden * c(Block2::Wi) + inner_v * c(Block2::Vi) + c(Block2::VN1) + c(Block2::VN) + c(Block2::Lambda)
        }
        Splitting::Three => {
            let c = |b| cost_3s_update(b, d, q, n, m);
            c(Block3::WN)
                + hidden * (c(Block3::Wi) + c(Block3::Ui) + c(Block3::LambdaI))
                + inner_v * c(Block3::Vi)
                + c(Block3::VN1)
                + c(Block3::VN)
                + c(Block3::LambdaN)
        }
    }
}

/// Entries of one iterate Xᵏ (all blocks once).
pub fn iterate_entries(splitting: Splitting, n_layers: u64, d: u64, q: u64, n: u64) -> u64 {
    let hidden = n_layers - 1;
    let w = hidden * d * d + q * d;
    let v = hidden * d * n + q * n;
    match splitting {
        Splitting::Two => w + v + q * n,
        // U and Λ₁..Λ_{N−1} add two d×n blocks per hidden layer.
        Splitting::Three => w + v + 2 * hidden * d * n + q * n,
    }
}

/// Resident entries of worker `i` (1-based) in the pipelined executor.
pub fn node_entries(splitting: Splitting, i: u64, n_layers: u64, d: u64, q: u64, n: u64) -> u64 {
    let last = n_layers;
    match splitting {
        Splitting::Two => {
            if i == last {
                // W_N, V_{N−1}^{k−1}, V_{N−1}^k, V_N^{k−1}, V_N^k, Λ^{k−1}
                q * d + 2 * d * n + 3 * q * n
            } else if i + 1 == last {
                // W_{N−1}^{k−1}, W_{N−1}^k, W_N, V_{N−2} ×2, V_{N−1} ×2, V_N^{k−1}, Λ^{k−1}
                2 * d * d + q * d + 4 * d * n + 2 * q * n
            } else {
                3 * d * d + 5 * d * n
            }
        }
        Splitting::Three => {
            if i == last {
                // W_N, V_{N−1} ×2, V_N ×2, Λ_N ×2
                q * d + 2 * d * n + 4 * q * n
            } else if i + 1 == last {
                // W_{N−1}, W_N, U ×2, V_{N−2} ×2, V_{N−1} ×2, V_N^{k−1}, Λ_{N−1} ×2, Λ_N^{k−1}
                d * d + q * d + 8 * d * n + 2 * q * n
            } else {
                2 * d * d + 11 * d * n
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityTable {
    pub serial_ops: u64,
    /// Makespan of the pipelined schedule with each update weighted by its cost.
    pub parallel_ops_span: u64,
    /// Two adjacent iterates stored serially.
    pub serial_mem: u64,
    pub per_node_mem: Vec<u64>,
}

pub fn complexity_tables(
    splitting: Splitting,
    k: u64,
    n_layers: u64,
    d: u64,
    q: u64,
    n: u64,
    m: CostModel,
) -> ComplexityTable {
    let serial_ops = k * cycle_ops(splitting, n_layers, d, q, n, m);
    let parallel_ops_span = crate::parallel::simulate_schedule(splitting, k as usize, n_layers as usize, |op| {
        op.cost(d, q, n, m)
    });
    ComplexityTable {
        serial_ops,
        parallel_ops_span,
        serial_mem: 2 * iterate_entries(splitting, n_layers, d, q, n),
        per_node_mem: (1..=n_layers).map(|i| node_entries(splitting, i, n_layers, d, q, n)).collect(),
    }
}
