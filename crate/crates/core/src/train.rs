//! Training loops shared by the CLI and the experiment tests: full-batch or
//! batched ADMM on either executor, and the gradient baselines, all producing
//! the same trace and per-iteration error series.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::admm2::{step_serial_2s, Admm2, Admm2Hyper};
use crate::admm3::{step_serial_3s, Admm3, Admm3Hyper};
use crate::analysis::TraceRecord;
use crate::assumptions::Mode;
use crate::baselines::{train_baseline_from, OptimizerConfig, OptimizerKind};
use crate::linalg::Matrix;
use crate::model::{mse, predict, Dataset, NetworkShape};
use crate::parallel::{run_parallel_2s, run_parallel_3s, PipelineTrace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trainer {
    Admm2Pp,
    Admm2Pg,
    Admm3Pp,
    Admm3Pg,
    Sgd,
    Sgdm,
    Adam,
}

impl Trainer {
    pub const ALL: [Trainer; 7] =
        [Trainer::Admm2Pp, Trainer::Admm2Pg, Trainer::Admm3Pp, Trainer::Admm3Pg, Trainer::Sgd, Trainer::Sgdm, Trainer::Adam];

    pub fn is_admm(self) -> bool {
        self.optimizer().is_none()
    }

    pub fn optimizer(self) -> Option<OptimizerKind> {
        match self {
            Trainer::Sgd => Some(OptimizerKind::Sgd),
            Trainer::Sgdm => Some(OptimizerKind::Sgdm),
            Trainer::Adam => Some(OptimizerKind::Adam),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Trainer::Admm2Pp => "admm2_pp",
            Trainer::Admm2Pg => "admm2_pg",
            Trainer::Admm3Pp => "admm3_pp",
            Trainer::Admm3Pg => "admm3_pg",
            Trainer::Sgd => "sgd",
            Trainer::Sgdm => "sgdm",
            Trainer::Adam => "adam",
        }
    }
}

impl fmt::Display for Trainer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Trainer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Trainer::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown trainer '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Executor {
    #[default]
    Serial,
    Parallel,
}

impl FromStr for Executor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "serial" => Ok(Executor::Serial),
            "parallel" => Ok(Executor::Parallel),
            _ => Err(Error::Parse(format!("unknown executor '{s}'"))),
        }
    }
}

impl fmt::Display for Executor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Executor::Serial => "serial",
            Executor::Parallel => "parallel",
        })
    }
}

/// How ADMM sees the training set.
///
/// `Batches(b)` partitions the samples once into consecutive batches of `b`;
/// each batch keeps its own auxiliary and dual blocks while W is shared, and
/// iteration k runs one cycle on batch (k − 1) mod B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Batching {
    #[default]
    Full,
    Batches(usize),
}

/// Errors of the weights after iteration `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub k: usize,
    pub train_mse: f64,
    pub test_mse: f64,
}

pub const METRICS_HEADER: [&str; 3] = ["k", "train_mse", "test_mse"];

pub fn write_metrics_csv<W: std::io::Write>(out: W, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([r.k.to_string(), r.train_mse.to_string(), r.test_mse.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: Vec<Matrix>,
    pub trace: Vec<TraceRecord>,
    pub metrics: Vec<MetricRow>,
    /// Slot schedule of a parallel run.
    pub pipeline: Option<PipelineTrace>,
    pub wall_ns: u64,
}

impl TrainOutcome {
    pub fn final_metrics(&self) -> Option<MetricRow> {
        self.metrics.last().copied()
    }
}

pub fn metric_row(k: usize, weights: &[Matrix], shape: &NetworkShape, train: &Dataset, test: &Dataset) -> Result<MetricRow> {
    let err = |d: &Dataset| -> Result<f64> { mse(&predict(weights, shape, &d.x)?, &d.y) };
    Ok(MetricRow { k, train_mse: err(train)?, test_mse: err(test)? })
}

fn check_parallel(executor: Executor, batching: Batching) -> Result<()> {
    if executor == Executor::Parallel && batching != Batching::Full {
        return Err(Error::InvalidHyper("the parallel executor runs full-batch ADMM only".into()));
    }
    Ok(())
}

/// Batch states count their own cycles; errors report the global iteration.
fn at_iteration(e: Error, k: usize) -> Error {
    match e {
        Error::NonFinite { what, .. } => Error::NonFinite { k, what },
        other => Error::Iteration { k, source: Box::new(other) },
    }
}

fn batches_of(train: &Dataset, batching: Batching) -> Result<Vec<Dataset>> {
    match batching {
        Batching::Full => Ok(vec![train.clone()]),
        Batching::Batches(0) => Err(Error::InvalidHyper("batch size must be positive".into())),
        Batching::Batches(b) => Ok(train.batches(b)),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn train_admm2(
    shape: &NetworkShape,
    train: &Dataset,
    test: &Dataset,
    hyper: &Admm2Hyper,
    weights: &[Matrix],
    iters: usize,
    executor: Executor,
    batching: Batching,
) -> Result<TrainOutcome> {
    check_parallel(executor, batching)?;
    let start = Instant::now();
    if executor == Executor::Parallel {
        let ctx = Admm2::new(shape, train, hyper)?;
        let init = ctx.init(weights)?;
        let run = run_parallel_2s(&ctx, &init, iters, true)?;
        let metrics = run
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| metric_row(j + 1, w, shape, train, test))
            .collect::<Result<_>>()?;
        return Ok(TrainOutcome {
            weights: run.state.w,
            trace: run.records,
            metrics,
            pipeline: Some(run.trace),
            wall_ns: start.elapsed().as_nanos() as u64,
        });
    }
    let parts = batches_of(train, batching)?;
    let ctxs: Vec<Admm2> = parts.iter().map(|b| Admm2::new(shape, b, hyper)).collect::<Result<_>>()?;
    let mut states = ctxs.iter().map(|c| c.init(weights)).collect::<Result<Vec<_>>>()?;
    let mut w = weights.to_vec();
    let mut trace = Vec::with_capacity(iters);
    let mut metrics = Vec::with_capacity(iters);
    for k in 1..=iters {
        let b = (k - 1) % ctxs.len();
        let st = &mut states[b];
        st.w = std::mem::take(&mut w);
        let mut row = step_serial_2s(&ctxs[b], st).map_err(|e| at_iteration(e, k))?;
        row.k = k;
        w = st.w.clone();
        trace.push(row);
        metrics.push(metric_row(k, &w, shape, train, test)?);
    }
    Ok(TrainOutcome { weights: w, trace, metrics, pipeline: None, wall_ns: start.elapsed().as_nanos() as u64 })
}

#[allow(clippy::too_many_arguments)]
pub fn train_admm3(
    shape: &NetworkShape,
    train: &Dataset,
    test: &Dataset,
    hyper: &Admm3Hyper,
    mode: Mode,
    weights: &[Matrix],
    iters: usize,
    executor: Executor,
    batching: Batching,
) -> Result<TrainOutcome> {
    check_parallel(executor, batching)?;
    let start = Instant::now();
    if executor == Executor::Parallel {
        let ctx = Admm3::new(shape, train, hyper, mode)?;
        let init = ctx.init(weights)?;
        let run = run_parallel_3s(&ctx, &init, iters, true)?;
        let metrics = run
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| metric_row(j + 1, w, shape, train, test))
            .collect::<Result<_>>()?;
        return Ok(TrainOutcome {
            weights: run.state.w,
            trace: run.records,
            metrics,
            pipeline: Some(run.trace),
            wall_ns: start.elapsed().as_nanos() as u64,
        });
    }
    let parts = batches_of(train, batching)?;
    let ctxs: Vec<Admm3> = parts.iter().map(|b| Admm3::new(shape, b, hyper, mode)).collect::<Result<_>>()?;
    let mut states = ctxs.iter().map(|c| c.init(weights)).collect::<Result<Vec<_>>>()?;
    let mut w = weights.to_vec();
    let mut trace = Vec::with_capacity(iters);
    let mut metrics = Vec::with_capacity(iters);
    for k in 1..=iters {
        let b = (k - 1) % ctxs.len();
        let st = &mut states[b];
        st.w = std::mem::take(&mut w);
        let mut row = step_serial_3s(&ctxs[b], st).map_err(|e| at_iteration(e, k))?;
        row.k = k;
        w = st.w.clone();
        trace.push(row);
        metrics.push(metric_row(k, &w, shape, train, test)?);
    }
    Ok(TrainOutcome { weights: w, trace, metrics, pipeline: None, wall_ns: start.elapsed().as_nanos() as u64 })
}

/// Gradient baseline; one iteration is one epoch over the training set.
pub fn train_gradient(
    shape: &NetworkShape,
    train: &Dataset,
    test: &Dataset,
    cfg: &OptimizerConfig,
    weights: &[Matrix],
    epochs: usize,
    seed: u64,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    let run = train_baseline_from(shape, train, cfg, weights.to_vec(), epochs, seed)?;
    let metrics = run
        .epoch_weights
        .iter()
        .enumerate()
        .map(|(j, w)| metric_row(j + 1, w, shape, train, test))
        .collect::<Result<_>>()?;
    Ok(TrainOutcome { weights: run.weights, trace: run.trace, metrics, pipeline: None, wall_ns: start.elapsed().as_nanos() as u64 })
}
