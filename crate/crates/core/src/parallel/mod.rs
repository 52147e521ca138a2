//! Pipelined model-parallel execution with one worker thread per residual
//! block. Workers exchange versioned block variables through a shared board
//! and run the same update functions as the serial cycle, so the iterates
//! agree bit for bit.

mod board;
mod program;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Instant;

pub use board::{SlotEvent, SlotEventKind};
pub use program::{program, simulate_schedule, units_per_cycle, OpSpec, Var, Version};

use crate::admm2::{Admm2, Admm2State};
use crate::admm3::{Admm3, Admm3State};
use crate::analysis::{self, Splitting, TraceRecord};
use crate::linalg::{flops, Matrix};
use crate::solver::InnerStats;
use crate::{Error, Result};
use board::Board;

/// One executed update.
#[derive(Debug, Clone, PartialEq)]
pub struct OpRecord {
    pub worker: usize,
    pub epoch: usize,
    pub op: String,
    pub start_slot: u64,
    pub end_slot: u64,
    /// Entries resident on the worker during this epoch.
    pub resident_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineTrace {
    pub ops: Vec<OpRecord>,
    /// Per-worker maximum of resident entries over all epochs.
    pub resident_high_water: Vec<usize>,
    /// Every board read and write in global order.
    pub slot_log: Vec<SlotEvent>,
}

impl PipelineTrace {
    pub fn makespan(&self) -> u64 {
        self.ops.iter().map(|o| o.end_slot).max().unwrap_or(0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["worker", "epoch", "op", "start_slot", "end_slot", "resident_entries"])?;
        for o in &self.ops {
            w.write_record([
                o.worker.to_string(),
                o.epoch.to_string(),
                o.op.clone(),
                o.start_slot.to_string(),
                o.end_slot.to_string(),
                o.resident_entries.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads that happened before the matching write, or keys written twice.
    pub fn slot_violations(&self) -> Vec<String> {
        let mut written: HashMap<(Var, usize), usize> = HashMap::new();
        let mut bad = Vec::new();
        for e in &self.slot_log {
            match e.kind {
                SlotEventKind::Write => {
                    if written.insert((e.var, e.version), e.seq).is_some() {
                        bad.push(format!("{}^{} written twice", e.var, e.version));
                    }
                }
                SlotEventKind::Read => {
                    if !written.contains_key(&(e.var, e.version)) {
                        bad.push(format!("{}^{} read by worker {} before it was written", e.var, e.version, e.worker));
                    }
                }
            }
        }
        bad
    }
}

pub fn makespan(trace: &PipelineTrace) -> u64 {
    trace.makespan()
}

pub fn per_node_memory(trace: &PipelineTrace) -> Vec<usize> {
    trace.resident_high_water.clone()
}

/// (serial units, pipelined makespan) for `k` cycles of unit-cost updates.
pub fn speedup_model(k: usize, n_layers: usize, splitting: Splitting) -> (u64, u64) {
    let serial = (k * units_per_cycle(splitting, n_layers)) as u64;
    (serial, simulate_schedule(splitting, k, n_layers, |_| 1))
}

#[derive(Debug, Clone)]
pub struct ParallelRun<S> {
    pub state: S,
    pub trace: PipelineTrace,
    /// One row per epoch when recording was requested.
    pub records: Vec<TraceRecord>,
    /// W₁..W_N after every epoch when recording was requested.
    pub weights: Vec<Vec<Matrix>>,
    pub inner: InnerStats,
}

/// The per-splitting pieces the executor needs.
trait Engine: Sync {
    type State: Clone + Send;

    fn splitting(&self) -> Splitting;
    fn n_layers(&self) -> usize;
    fn data(&self) -> &Matrix;
    /// A state whose blocks are empty placeholders, at iteration `k`.
    fn scratch(&self, k: usize) -> Self::State;
    fn get<'s>(&self, s: &'s Self::State, var: Var) -> &'s Matrix;
    fn slot<'s>(&self, s: &'s mut Self::State, var: Var) -> &'s mut Matrix;
    fn compute(&self, s: &Self::State, var: Var, stats: &mut InnerStats) -> Result<Matrix>;
    fn all_vars(&self) -> Vec<Var>;
    /// The iterate after epoch `k`, given the previous one and the new blocks.
    fn assemble(&self, prev: &Self::State, blocks: HashMap<Var, Matrix>, k: usize) -> Self::State;
    fn k_of(&self, s: &Self::State) -> usize;
    fn weights<'s>(&self, s: &'s Self::State) -> &'s [Matrix];
    fn merit(&self, s: &Self::State) -> Result<f64>;
    fn record(&self, prev: &Self::State, prev_merit: f64, cur: &Self::State, ops: u64, wall_ns: u64) -> Result<TraceRecord>;
}

fn placeholder() -> Matrix {
    Matrix::zeros(0, 0)
}

impl Engine for Admm2<'_> {
    type State = Admm2State;

    fn splitting(&self) -> Splitting {
        Splitting::Two
    }

    fn n_layers(&self) -> usize {
        self.shape.n_layers
    }

    fn data(&self) -> &Matrix {
        self.x
    }

    fn scratch(&self, k: usize) -> Admm2State {
        let n = self.n_layers();
        Admm2State { w: vec![placeholder(); n], v: vec![placeholder(); n], lambda: placeholder(), k }
    }

    fn get<'s>(&self, s: &'s Admm2State, var: Var) -> &'s Matrix {
        match var {
            Var::W(i) => &s.w[i - 1],
            Var::V(i) => &s.v[i - 1],
            Var::Lam(_) => &s.lambda,
            Var::U(_) => unreachable!("2-splitting has no U blocks"),
        }
    }

    fn slot<'s>(&self, s: &'s mut Admm2State, var: Var) -> &'s mut Matrix {
        match var {
            Var::W(i) => &mut s.w[i - 1],
            Var::V(i) => &mut s.v[i - 1],
            Var::Lam(_) => &mut s.lambda,
            Var::U(_) => unreachable!("2-splitting has no U blocks"),
        }
    }

    fn compute(&self, s: &Admm2State, var: Var, stats: &mut InnerStats) -> Result<Matrix> {
        let n = self.n_layers();
        match var {
            Var::W(i) if i == n => self.update_wn(s),
            Var::W(i) => self.update_wi(s, i, stats),
            Var::V(i) if i == n => self.update_vn(s),
            Var::V(i) if i + 1 == n => self.update_vn1(s),
            Var::V(i) => self.update_vi(s, i, stats),
            Var::Lam(_) => self.update_lambda(s),
            Var::U(_) => Err(Error::Parallel("2-splitting has no U blocks".into())),
        }
    }

    fn all_vars(&self) -> Vec<Var> {
        let n = self.n_layers();
        (1..=n).map(Var::W).chain((1..=n).map(Var::V)).chain([Var::Lam(n)]).collect()
    }

    fn assemble(&self, prev: &Admm2State, mut blocks: HashMap<Var, Matrix>, k: usize) -> Admm2State {
        let mut s = prev.clone();
        for var in self.all_vars() {
            if let Some(m) = blocks.remove(&var) {
                *self.slot(&mut s, var) = m;
            }
        }
        s.k = k;
        s
    }

    fn k_of(&self, s: &Admm2State) -> usize {
        s.k
    }

    fn weights<'s>(&self, s: &'s Admm2State) -> &'s [Matrix] {
        &s.w
    }

    fn merit(&self, s: &Admm2State) -> Result<f64> {
        self.aug_lag(s)
    }

    fn record(&self, prev: &Admm2State, prev_merit: f64, cur: &Admm2State, ops: u64, wall_ns: u64) -> Result<TraceRecord> {
        analysis::record_2s(self, prev, prev_merit, cur, ops, wall_ns)
    }
}

impl Engine for Admm3<'_> {
    type State = Admm3State;

    fn splitting(&self) -> Splitting {
        Splitting::Three
    }

    fn n_layers(&self) -> usize {
        self.shape.n_layers
    }

    fn data(&self) -> &Matrix {
        self.x
    }

    fn scratch(&self, k: usize) -> Admm3State {
        let n = self.n_layers();
        Admm3State {
            w: vec![placeholder(); n],
            u: vec![placeholder(); n - 1],
            v: vec![placeholder(); n],
            lambda: vec![placeholder(); n],
            u_lag: Vec::new(),
            v_lag: Vec::new(),
            k,
        }
    }

    fn get<'s>(&self, s: &'s Admm3State, var: Var) -> &'s Matrix {
        match var {
            Var::W(i) => &s.w[i - 1],
            Var::U(i) => &s.u[i - 1],
            Var::V(i) => &s.v[i - 1],
            Var::Lam(i) => &s.lambda[i - 1],
        }
    }

    fn slot<'s>(&self, s: &'s mut Admm3State, var: Var) -> &'s mut Matrix {
        match var {
            Var::W(i) => &mut s.w[i - 1],
            Var::U(i) => &mut s.u[i - 1],
            Var::V(i) => &mut s.v[i - 1],
            Var::Lam(i) => &mut s.lambda[i - 1],
        }
    }

    fn compute(&self, s: &Admm3State, var: Var, _stats: &mut InnerStats) -> Result<Matrix> {
        let n = self.n_layers();
        match var {
            Var::W(i) if i == n => self.update_wn(s),
            Var::W(i) => self.update_wi(s, i),
            Var::U(i) => self.update_ui(s, i),
            Var::V(i) if i == n => self.update_vn(s),
            Var::V(i) if i + 1 == n => self.update_vn1(s),
            Var::V(i) => self.update_vi(s, i),
            Var::Lam(i) if i == n => self.update_lambda_n(s),
            Var::Lam(i) => self.update_lambda_i(s, i),
        }
    }

    fn all_vars(&self) -> Vec<Var> {
        let n = self.n_layers();
        (1..=n)
            .map(Var::W)
            .chain((1..n).map(Var::U))
            .chain((1..=n).map(Var::V))
            .chain((1..=n).map(Var::Lam))
            .collect()
    }

    fn assemble(&self, prev: &Admm3State, mut blocks: HashMap<Var, Matrix>, k: usize) -> Admm3State {
        let n = self.n_layers();
        let mut s = prev.clone();
        s.u_lag = prev.u.clone();
        s.v_lag = prev.v[..n - 1].to_vec();
        for var in self.all_vars() {
            if let Some(m) = blocks.remove(&var) {
                *self.slot(&mut s, var) = m;
            }
        }
        s.k = k;
        s
    }

    fn k_of(&self, s: &Admm3State) -> usize {
        s.k
    }

    fn weights<'s>(&self, s: &'s Admm3State) -> &'s [Matrix] {
        &s.w
    }

    fn merit(&self, s: &Admm3State) -> Result<f64> {
        self.aux_function(s)
    }

    fn record(&self, prev: &Admm3State, prev_merit: f64, cur: &Admm3State, ops: u64, wall_ns: u64) -> Result<TraceRecord> {
        analysis::record_3s(self, prev, prev_merit, cur, ops, wall_ns)
    }
}

/// Runs `k` pipelined epochs of 2-splitting ADMM from `init`.
pub fn run_parallel_2s(ctx: &Admm2, init: &Admm2State, k: usize, record: bool) -> Result<ParallelRun<Admm2State>> {
    run(ctx, init, k, record)
}

/// Runs `k` pipelined epochs of 3-splitting ADMM from `init`.
pub fn run_parallel_3s(ctx: &Admm3, init: &Admm3State, k: usize, record: bool) -> Result<ParallelRun<Admm3State>> {
    run(ctx, init, k, record)
}

/// What a worker reports at the end of an epoch.
struct EpochReport {
    epoch: usize,
    blocks: Vec<(Var, Matrix)>,
    ops: u64,
}

struct WorkerOutput {
    ops: Vec<OpRecord>,
    high_water: usize,
    inner: InnerStats,
}

fn run<E: Engine>(ctx: &E, init: &E::State, epochs: usize, record: bool) -> Result<ParallelRun<E::State>> {
    let n = ctx.n_layers();
    let first = ctx.k_of(init);
    let board = Board::new();
    for var in ctx.all_vars() {
        board.publish(0, var, first, Arc::new(ctx.get(init, var).clone()), 0)?;
    }
    let (tx, rx) = mpsc::channel::<EpochReport>();
    let last = first + epochs;

    let (outputs, (records, weights), final_state) = std::thread::scope(|scope| {
        let handles: Vec<_> = (1..=n)
            .map(|i| {
                let tx = tx.clone();
                let board = &board;
                scope.spawn(move || {
                    let res = catch_unwind(AssertUnwindSafe(|| worker(ctx, board, i, first, last, tx)));
                    let res = match res {
                        Ok(r) => r,
                        Err(p) => {
                            let msg = p
                                .downcast_ref::<&str>()
                                .map(|s| s.to_string())
                                .or_else(|| p.downcast_ref::<String>().cloned())
                                .unwrap_or_else(|| "unknown panic".into());
                            Err(Error::Parallel(format!("worker {i} panicked: {msg}")))
                        }
                    };
                    if res.is_err() {
                        board.abort();
                    }
                    res
                })
            })
            .collect();
        drop(tx);

        let collected = collect_epochs(ctx, init, first, last, record, &rx);
        if collected.is_err() {
            board.abort();
        }
        let mut outputs = Vec::with_capacity(n);
        let mut first_err: Option<Error> = None;
        for h in handles {
            match h.join() {
                Ok(Ok(o)) => outputs.push(o),
                Ok(Err(e)) => keep_first(&mut first_err, e),
                Err(_) => keep_first(&mut first_err, Error::Parallel("worker thread could not be joined".into())),
            }
        }
        if let Some(e) = first_err {
            return Err(e);
        }
        let (records, weights, state) = collected?;
        Ok((outputs, (records, weights), state))
    })?;

    let mut trace = PipelineTrace::default();
    let mut inner = InnerStats::default();
    for o in outputs {
        trace.ops.extend(o.ops);
        trace.resident_high_water.push(o.high_water);
        inner.merge(&o.inner);
    }
    trace.ops.sort_by(|a, b| (a.start_slot, a.worker, a.epoch).cmp(&(b.start_slot, b.worker, b.epoch)));
    trace.slot_log = board.into_log();
    Ok(ParallelRun { state: final_state, trace, records, weights, inner })
}

/// Prefers a real failure over the "aborted" errors it caused elsewhere.
fn keep_first(slot: &mut Option<Error>, e: Error) {
    let aborted = matches!(&e, Error::Parallel(m) if m.contains(board::ABORTED));
    match slot {
        None => *slot = Some(e),
        Some(Error::Parallel(m)) if m.contains(board::ABORTED) && !aborted => *slot = Some(e),
        _ => {}
    }
}

fn collect_epochs<E: Engine>(
    ctx: &E,
    init: &E::State,
    first: usize,
    last: usize,
    record: bool,
    rx: &mpsc::Receiver<EpochReport>,
) -> Result<(Vec<TraceRecord>, Vec<Vec<Matrix>>, E::State)> {
    let n = ctx.n_layers();
    let mut pending: BTreeMap<usize, (usize, HashMap<Var, Matrix>, u64)> = BTreeMap::new();
    let mut prev = init.clone();
    let mut prev_merit = if record { ctx.merit(init)? } else { 0.0 };
    let mut records = Vec::new();
    let mut weights = Vec::new();
    let mut next = first + 1;
    let mut last_seen = Instant::now();
    while next <= last {
        let Ok(msg) = rx.recv() else { break };
        let entry = pending.entry(msg.epoch).or_insert_with(|| (0, HashMap::new(), 0));
        entry.0 += 1;
        entry.2 += msg.ops;
        entry.1.extend(msg.blocks);
        while pending.get(&next).is_some_and(|e| e.0 == n) {
            let (_, blocks, ops) = pending.remove(&next).expect("checked above");
            let cur = ctx.assemble(&prev, blocks, next);
            if record {
                let now = Instant::now();
                let wall = now.duration_since(last_seen).as_nanos() as u64;
                last_seen = now;
                let row = ctx.record(&prev, prev_merit, &cur, ops, wall)?;
                prev_merit = ctx.merit(&cur)?;
                records.push(row);
                weights.push(ctx.weights(&cur).to_vec());
            }
            prev = cur;
            next += 1;
        }
    }
    if next <= last {
        return Err(Error::Parallel(format!("workers stopped before epoch {next} was complete")));
    }
    Ok((records, weights, prev))
}

type Store = HashMap<(Var, usize), (Arc<Matrix>, u64)>;

/// Makes every input of `op` at epoch `k` local, fetching from the board as
/// needed, and returns the logical time the last of them became ready.
fn resolve(
    board: &Board,
    i: usize,
    op: &OpSpec,
    k: usize,
    data: &Arc<Matrix>,
    local: &mut Store,
) -> Result<u64> {
    let mut ready = 0;
    for &(var, ver) in &op.reads {
        let kk = if ver == Version::Cur { k } else { k - 1 };
        let t = match local.get(&(var, kk)) {
            Some(entry) => entry.1,
            None => {
                let entry = if var == Var::V(0) { (Arc::clone(data), 0) } else { board.fetch(i, var, kk)? };
                let t = entry.1;
                local.insert((var, kk), entry);
                t
            }
        };
        ready = ready.max(t);
    }
    Ok(ready)
}

fn worker<E: Engine>(
    ctx: &E,
    board: &Board,
    i: usize,
    first: usize,
    last: usize,
    tx: mpsc::Sender<EpochReport>,
) -> Result<WorkerOutput> {
    let prog = program(ctx.splitting(), ctx.n_layers(), i);
    let data = Arc::new(ctx.data().clone());
    // Keys read at the previous version; their current version is kept across epochs.
    let carried: Vec<Var> = prog
        .iter()
        .flat_map(|op| op.reads.iter().filter(|(_, v)| *v == Version::Prev).map(|(var, _)| *var))
        .collect();
    let mut local: Store = HashMap::new();
    let mut clock = 0u64;
    let mut out = WorkerOutput { ops: Vec::new(), high_water: 0, inner: InnerStats::default() };

    for k in first + 1..=last {
        let mut scratch = ctx.scratch(k - 1);
        let mut epoch_ops = 0u64;
        let row_start = out.ops.len();
        for op in &prog {
            let start = resolve(board, i, op, k, &data, &mut local)?.max(clock);
            for &(var, ver) in &op.reads {
                if var != Var::V(0) {
                    let kk = if ver == Version::Cur { k } else { k - 1 };
                    *ctx.slot(&mut scratch, var) = (*local[&(var, kk)].0).clone();
                }
            }
            let (res, ops) = flops::measure(|| ctx.compute(&scratch, op.out, &mut out.inner));
            let m = Arc::new(res?);
            epoch_ops += ops;
            let end = start + 1;
            clock = end;
            board.publish(i, op.out, k, Arc::clone(&m), end)?;
            *ctx.slot(&mut scratch, op.out) = (*m).clone();
            if op.in_place {
                local.remove(&(op.out, k - 1));
            }
            local.insert((op.out, k), (m, end));
            out.ops.push(OpRecord {
                worker: i,
                epoch: k,
                op: op.out.to_string(),
                start_slot: start,
                end_slot: end,
                resident_entries: 0,
            });
        }
        let resident: usize = local.values().map(|(m, _)| m.len()).sum();
        out.high_water = out.high_water.max(resident);
        for r in &mut out.ops[row_start..] {
            r.resident_entries = resident;
        }
        let blocks = prog.iter().map(|op| (op.out, (*local[&(op.out, k)].0).clone())).collect();
        // The coordinator may have stopped listening after an error elsewhere.
        let _ = tx.send(EpochReport { epoch: k, blocks, ops: epoch_ops });
        local.retain(|(var, kk), _| *kk == k && carried.contains(var));
    }
    Ok(out)
}
