//! Static per-worker update programs and their dependency structure.

use std::fmt;

use crate::analysis::{cost_2s_update, cost_3s_update, Block2, Block3, CostModel, Splitting};

/// A block variable name. Indices are 1-based layer indices; `V(0)` is the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    W(usize),
    U(usize),
    V(usize),
    Lam(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::W(i) => write!(f, "W_{i}"),
            Var::U(i) => write!(f, "U_{i}"),
            Var::V(i) => write!(f, "V_{i}"),
            Var::Lam(i) => write!(f, "Lambda_{i}"),
        }
    }
}

/// Which iterate of an input an update reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Version {
    /// Written earlier in the same epoch.
    Cur,
    /// From the previous epoch.
    Prev,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpSpec {
    pub splitting: Splitting,
    pub n_layers: usize,
    pub out: Var,
    pub reads: Vec<(Var, Version)>,
    /// The output overwrites its own previous version, which therefore does
    /// not stay resident next to it.
    pub in_place: bool,
}

impl OpSpec {
    fn new(splitting: Splitting, n_layers: usize, out: Var, reads: Vec<(Var, Version)>) -> Self {
        Self { splitting, n_layers, out, reads, in_place: false }
    }

    /// Operation count of this update under the cost model.
    pub fn cost(&self, d: u64, q: u64, n: u64, m: CostModel) -> u64 {
        let last = self.n_layers;
        match self.splitting {
            Splitting::Two => {
                let b = match self.out {
                    Var::W(i) if i == last => Block2::WN,
                    Var::W(_) => Block2::Wi,
                    Var::V(i) if i == last => Block2::VN,
                    Var::V(i) if i + 1 == last => Block2::VN1,
                    Var::V(_) => Block2::Vi,
                    _ => Block2::Lambda,
                };
                cost_2s_update(b, d, q, n, m)
            }
            Splitting::Three => {
                let b = match self.out {
                    Var::W(i) if i == last => Block3::WN,
                    Var::W(_) => Block3::Wi,
                    Var::U(_) => Block3::Ui,
                    Var::V(i) if i == last => Block3::VN,
                    Var::V(i) if i + 1 == last => Block3::VN1,
                    Var::V(_) => Block3::Vi,
                    Var::Lam(i) if i == last => Block3::LambdaN,
                    Var::Lam(_) => Block3::LambdaI,
                };
                cost_3s_update(b, d, q, n, m)
            }
        }
    }
}

/// The ordered updates worker `i` (1-based) performs in every epoch.
pub fn program(splitting: Splitting, n_layers: usize, i: usize) -> Vec<OpSpec> {
    use Var::*;
    use Version::*;
    let n = n_layers;
    let op = |out, reads| OpSpec::new(splitting, n, out, reads);
    match splitting {
        Splitting::Two if i == n => {
            let mut lam = op(Lam(n), vec![(Lam(n), Prev), (W(n), Cur), (V(n - 1), Cur), (V(n), Cur)]);
            lam.in_place = true;
            vec![
                op(W(n), vec![(V(n), Prev), (Lam(n), Prev), (V(n - 1), Prev)]),
                op(V(n), vec![(W(n), Cur), (V(n - 1), Cur), (Lam(n), Prev)]),
                lam,
            ]
        }
        Splitting::Two => {
            let v = if i + 2 <= n {
                op(V(i), vec![(V(i - 1), Cur), (W(i), Cur), (W(i + 1), Cur), (V(i), Prev), (V(i + 1), Prev)])
            } else {
                op(V(i), vec![(V(i - 1), Cur), (W(i), Cur), (W(n), Cur), (V(n), Prev), (Lam(n), Prev)])
            };
            vec![op(W(i), vec![(W(i), Prev), (V(i - 1), Prev), (V(i), Prev)]), v]
        }
        Splitting::Three if i == n => vec![
            op(W(n), vec![(V(n), Prev), (Lam(n), Prev), (V(n - 1), Prev)]),
            op(V(n), vec![(W(n), Cur), (V(n - 1), Cur), (Lam(n), Prev)]),
            op(Lam(n), vec![(Lam(n), Prev), (W(n), Cur), (V(n - 1), Cur), (V(n), Cur)]),
        ],
        Splitting::Three => {
            let v = if i + 2 <= n {
                op(
                    V(i),
                    vec![(V(i - 1), Cur), (U(i), Cur), (U(i + 1), Prev), (V(i + 1), Prev), (W(i + 1), Cur), (Lam(i + 1), Prev)],
                )
            } else {
                op(V(i), vec![(V(i - 1), Cur), (U(i), Cur), (W(n), Cur), (V(n), Prev), (Lam(n), Prev)])
            };
            vec![
                op(W(i), vec![(U(i), Prev), (Lam(i), Prev), (V(i - 1), Prev)]),
                op(U(i), vec![(U(i), Prev), (V(i - 1), Cur), (V(i), Prev), (W(i), Cur), (Lam(i), Prev)]),
                v,
                op(Lam(i), vec![(Lam(i), Prev), (W(i), Cur), (V(i - 1), Cur), (U(i), Cur)]),
            ]
        }
    }
}

/// Updates per serial cycle: 2N+1 for 2s, 4N−1 for 3s.
pub fn units_per_cycle(splitting: Splitting, n_layers: usize) -> usize {
    match splitting {
        Splitting::Two => 2 * n_layers + 1,
        Splitting::Three => (4 * n_layers).saturating_sub(1),
    }
}

/// Logical makespan of `epochs` pipelined epochs when each update costs
/// `weight(op)` slots and communication is free.
///
/// Each worker runs its program in order and starts an update as soon as it
/// is idle and every input has been produced.
pub fn simulate_schedule(splitting: Splitting, epochs: usize, n_layers: usize, weight: impl Fn(&OpSpec) -> u64) -> u64 {
    use std::collections::HashMap;
    let programs: Vec<Vec<OpSpec>> = (1..=n_layers).map(|i| program(splitting, n_layers, i)).collect();
    let weights: Vec<Vec<u64>> = programs.iter().map(|p| p.iter().map(&weight).collect()).collect();
    let mut ready: HashMap<(Var, usize), u64> = HashMap::new();
    let mut clock = vec![0u64; n_layers];
    // (epoch, op index) each worker is at.
    let mut pos = vec![(1usize, 0usize); n_layers];
    let lookup = |ready: &HashMap<(Var, usize), u64>, var: Var, k: usize| -> Option<u64> {
        if k == 0 || var == Var::V(0) {
            Some(0)
        } else {
            ready.get(&(var, k)).copied()
        }
    };
    let mut makespan = 0;
    // Ready time of every input of `op` at epoch k, or None while one is unknown.
    let inputs_ready = |ready: &HashMap<(Var, usize), u64>, op: &OpSpec, k: usize| -> Option<u64> {
        let mut t = 0;
        for &(var, ver) in &op.reads {
            let kk = if ver == Version::Cur { k } else { k - 1 };
            t = t.max(lookup(ready, var, kk)?);
        }
        Some(t)
    };
    loop {
        let mut progressed = false;
        let mut done = true;
        for w in 0..n_layers {
            while pos[w].0 <= epochs {
                done = false;
                let (k, j) = pos[w];
                let prog = &programs[w];
                let Some(t) = inputs_ready(&ready, &prog[j], k) else { break };
                let end = t.max(clock[w]) + weights[w][j];
                ready.insert((prog[j].out, k), end);
                clock[w] = end;
                makespan = makespan.max(end);
                progressed = true;
                pos[w] = if j + 1 == prog.len() { (k + 1, 0) } else { (k, j + 1) };
            }
        }
        if done || !progressed {
            break;
        }
    }
    makespan
}
