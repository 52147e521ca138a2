//! Per-iteration diagnostics, convergence monitors and the cost model.

mod cost;
mod grad;
mod monitor;

use std::io::{Read, Write};

pub use cost::{
    complexity_tables, cost_2s_update, cost_3s_update, cycle_ops, iterate_entries, node_entries, Block2, Block3,
    ComplexityTable, CostModel, Splitting,
};
pub use grad::{grad_aux, grad_l2s, grad_l3s, kkt_residual_2s, kkt_residual_3s, Grad2, Grad3};
pub use monitor::{b2_ratio, check_b1, check_b2, fit_rate, least_squares, moving_average, B1Report, B2Report, RateFit, MIN_STEP};

use crate::admm2::{Admm2, Admm2State};
use crate::admm3::{Admm3, Admm3State};
use crate::model::objective;
use crate::{Error, Result};

pub const TRACE_HEADER: [&str; 11] =
    ["k", "objective", "aug_lag", "aux_lag", "delta_x", "grad_lag", "kkt", "b1_margin", "b2_ratio", "op_count", "wall_ns"];

/// One row of diagnostics after iteration `k`.
///
/// `aux_lag` is the merit whose decrease is monitored: the auxiliary function
/// for 3s, the augmented Lagrangian itself for 2s, and the training loss for
/// the gradient baselines. `grad_lag` is the gradient norm of that merit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub objective: f64,
    pub aug_lag: f64,
    pub aux_lag: f64,
    pub delta_x: f64,
    pub grad_lag: f64,
    pub kkt: f64,
    /// Merit drop into this iterate, f(Xᵏ⁻¹) − f(Xᵏ).
    pub b1_margin: f64,
    pub b2_ratio: f64,
    pub op_count: u64,
    pub wall_ns: u64,
}

impl TraceRecord {
    fn fields(&self) -> [String; 11] {
        [
            self.k.to_string(),
            self.objective.to_string(),
            self.aug_lag.to_string(),
            self.aux_lag.to_string(),
            self.delta_x.to_string(),
            self.grad_lag.to_string(),
            self.kkt.to_string(),
            self.b1_margin.to_string(),
            self.b2_ratio.to_string(),
            self.op_count.to_string(),
            self.wall_ns.to_string(),
        ]
    }
}

pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header != TRACE_HEADER {
        return Err(Error::Parse(format!("unexpected trace header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let f = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| Error::Parse(format!("bad number '{}' in column {}", &rec[j], TRACE_HEADER[j])))
        };
        let u = |j: usize| -> Result<u64> {
            rec[j].parse().map_err(|_| Error::Parse(format!("bad integer '{}' in column {}", &rec[j], TRACE_HEADER[j])))
        };
        rows.push(TraceRecord {
            k: u(0)? as usize,
            objective: f(1)?,
            aug_lag: f(2)?,
            aux_lag: f(3)?,
            delta_x: f(4)?,
            grad_lag: f(5)?,
            kkt: f(6)?,
            b1_margin: f(7)?,
            b2_ratio: f(8)?,
            op_count: u(9)?,
            wall_ns: u(10)?,
        });
    }
    Ok(rows)
}

/// Diagnostics of the 2s iterate `cur` reached from `prev`, whose merit was `prev_merit`.
pub fn record_2s(
    ctx: &Admm2,
    prev: &Admm2State,
    prev_merit: f64,
    cur: &Admm2State,
    op_count: u64,
    wall_ns: u64,
) -> Result<TraceRecord> {
    let aug = ctx.aug_lag(cur)?;
    let delta_x = cur.distance(prev)?;
    let grad = grad_l2s(ctx, cur)?.norm();
    Ok(TraceRecord {
        k: cur.k,
        objective: objective(&cur.w, ctx.shape, ctx.x, ctx.y, ctx.hyper.lambda)?,
        aug_lag: aug,
        aux_lag: aug,
        delta_x,
        grad_lag: grad,
        kkt: kkt_residual_2s(ctx, cur)?,
        b1_margin: prev_merit - aug,
        b2_ratio: b2_ratio(grad, delta_x),
        op_count,
        wall_ns,
    })
}

/// Diagnostics of the 3s iterate; distances and gradients are taken over
/// (X, U′, V′) and the merit is the auxiliary function.
pub fn record_3s(
    ctx: &Admm3,
    prev: &Admm3State,
    prev_merit: f64,
    cur: &Admm3State,
    op_count: u64,
    wall_ns: u64,
) -> Result<TraceRecord> {
    let aug = ctx.aug_lag(cur)?;
    let aux = ctx.aux_function(cur)?;
    let delta_x = cur.distance(prev)?;
    let grad = grad_aux(ctx, cur)?.norm();
    Ok(TraceRecord {
        k: cur.k,
        objective: objective(&cur.w, ctx.shape, ctx.x, ctx.y, ctx.hyper.lambda)?,
        aug_lag: aug,
        aux_lag: aux,
        delta_x,
        grad_lag: grad,
        kkt: kkt_residual_3s(ctx, cur)?,
        b1_margin: prev_merit - aux,
        b2_ratio: b2_ratio(grad, delta_x),
        op_count,
        wall_ns,
    })
}
