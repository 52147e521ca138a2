use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fcresnet_admm::admm3::validate_3s_params;
use fcresnet_admm::analysis::{check_b1, check_b2, write_trace_csv, B1Report, B2Report};
use fcresnet_admm::assumptions::{AssumptionReport, Mode};
use fcresnet_admm::linalg::Matrix;
use fcresnet_admm::model::{gen_l1, gen_oscillation, objective, split_train_test, Dataset, NetworkShape};
use fcresnet_admm::train::{train_admm2, train_admm3, train_gradient, write_metrics_csv, Executor, TrainOutcome};

use crate::config::{ExperimentConfig, Hyper, Task};
use crate::weights::write_weights;

/// Merit rises above this count as B1 violations.
pub const B1_SLACK: f64 = 1e-10;
/// Gradient norms above this with a zero step count as B2 stalls.
pub const B2_GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output.dir`.
    pub out: Option<PathBuf>,
    pub dump_weights: bool,
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub final_k: usize,
    pub final_train_mse: f64,
    pub final_test_mse: f64,
    pub lambda: f64,
    /// ½‖V_N − Y‖² + (λ/2)Σ‖Wᵢ‖² on the training set.
    pub final_objective: f64,
    pub final_kkt: f64,
    pub wall_ns: u64,
    pub total_ops: u64,
    pub b1: B1Report,
    pub b2: B2Report,
    pub assumptions: Option<AssumptionReport>,
    /// Max-abs difference of the final weights against a serial rerun.
    pub parallel_vs_serial: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub shape: NetworkShape,
    pub train: Dataset,
    pub test: Dataset,
    pub outcome: TrainOutcome,
    pub summary: Summary,
}

pub fn make_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let data = match cfg.task {
        Task::L1 => gen_l1(cfg.d, cfg.n_samples, cfg.seed)?,
        Task::Oscillation => gen_oscillation(cfg.d, cfg.n_samples, cfg.seed)?,
    };
    Ok(split_train_test(&data, cfg.split_ratio, cfg.seed)?)
}

fn max_abs_diff(a: &[Matrix], b: &[Matrix]) -> Result<f64> {
    let mut m: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        m = m.max(x.max_abs_diff(y)?);
    }
    Ok(m)
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunResult> {
    let (train, test) = make_data(cfg)?;
    let shape = NetworkShape::uniform(cfg.n_layers, cfg.d, train.q(), cfg.activation)?;
    let w0 = cfg.init.weights(&shape, cfg.seed);
    let mode = if opts.strict { Mode::Strict } else { Mode::Permissive };
    let k = cfg.iterations;

    let mut parallel_vs_serial = None;
    let (mut outcome, assumptions) = match &cfg.hyper {
        Hyper::Admm2(h) => {
            let report = h.validate(&shape, mode)?;
            let out = train_admm2(&shape, &train, &test, h, &w0, k, cfg.executor, cfg.batching)?;
            if cfg.executor == Executor::Parallel {
                let serial = train_admm2(&shape, &train, &test, h, &w0, k, Executor::Serial, cfg.batching)?;
                parallel_vs_serial = Some(max_abs_diff(&out.weights, &serial.weights)?);
            }
            (out, Some(report))
        }
        Hyper::Admm3(h) => {
            let derived = validate_3s_params(h, &shape, Some(train.x.frob_norm()), mode)?;
            let out = train_admm3(&shape, &train, &test, h, mode, &w0, k, cfg.executor, cfg.batching)?;
            if cfg.executor == Executor::Parallel {
                let serial = train_admm3(&shape, &train, &test, h, mode, &w0, k, Executor::Serial, cfg.batching)?;
                parallel_vs_serial = Some(max_abs_diff(&out.weights, &serial.weights)?);
            }
            (out, Some(derived.report))
        }
        Hyper::Gradient(c) => (train_gradient(&shape, &train, &test, c, &w0, k, cfg.seed)?, None),
    };
    if !cfg.wall_clock {
        for r in &mut outcome.trace {
            r.wall_ns = 0;
        }
    }

    let last = outcome.final_metrics();
    let lambda = cfg.hyper.lambda();
    let summary = Summary {
        final_k: last.map_or(0, |m| m.k),
        final_train_mse: last.map_or(f64::NAN, |m| m.train_mse),
        final_test_mse: last.map_or(f64::NAN, |m| m.test_mse),
        lambda,
        final_objective: objective(&outcome.weights, &shape, &train.x, &train.y, lambda)?,
        final_kkt: outcome.trace.last().map_or(f64::NAN, |r| r.kkt),
        wall_ns: outcome.wall_ns,
        total_ops: outcome.trace.iter().map(|r| r.op_count).sum(),
        b1: check_b1(&outcome.trace, B1_SLACK),
        b2: check_b2(&outcome.trace, B2_GRAD_TOL),
        assumptions,
        parallel_vs_serial,
    };
    Ok(RunResult { shape, train, test, outcome, summary })
}

fn list_ks(ks: &[usize]) -> String {
    const SHOWN: usize = 10;
    let mut s: Vec<String> = ks.iter().take(SHOWN).map(ToString::to_string).collect();
    if ks.len() > SHOWN {
        s.push("...".into());
    }
    if s.is_empty() {
        "none".into()
    } else {
        s.join(" ")
    }
}

/// `key = value` lines; floats use the shortest round-trip form.
pub fn render_summary(cfg: &ExperimentConfig, s: &Summary) -> String {
    let mut t = String::new();
    let mut kv = |k: &str, v: &dyn std::fmt::Display| {
        let _ = writeln!(t, "{k} = {v}");
    };
    kv("name", &cfg.name);
    kv("task", &cfg.task);
    kv("trainer", &cfg.trainer);
    kv("executor", &cfg.executor);
    kv("layers", &cfg.n_layers);
    kv("activation", &cfg.activation);
    kv("seed", &cfg.seed);
    kv("iterations", &cfg.iterations);
    kv("final_k", &s.final_k);
    kv("final_train_mse", &s.final_train_mse);
    kv("final_test_mse", &s.final_test_mse);
    kv("lambda", &s.lambda);
    kv("final_objective", &s.final_objective);
    kv("final_kkt", &s.final_kkt);
    kv("wall_time_s", &(s.wall_ns as f64 * 1e-9));
    kv("total_ops", &s.total_ops);
    kv("b1_holds", &s.b1.holds);
    kv("b1_c1_hat", &s.b1.c1_hat);
    kv("b1_violations", &s.b1.violations.len());
    kv("b1_violation_ks", &list_ks(&s.b1.violations));
    kv("b2_bounded", &s.b2.bounded());
    kv("b2_c2_hat", &s.b2.c2_hat);
    kv("b2_stalled", &s.b2.stalled.len());
    if let Some(d) = s.parallel_vs_serial {
        kv("parallel_vs_serial_max_abs_diff", &d);
    }
    if let Some(r) = &s.assumptions {
        kv("assumptions_passed", &r.all_passed());
        for c in &r.checks {
            let _ = writeln!(t, "assumption {} = {} ({})", c.name, if c.passed { "ok" } else { "FAILED" }, c.detail);
        }
    }
    t
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

/// Writes every artifact of a finished run into `dir` and returns their names.
pub fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, run: &RunResult, opts: &RunOptions) -> Result<Vec<String>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut names = vec!["trace.csv".to_string(), "metrics.csv".into(), "summary.txt".into()];
    write_trace_csv(create(dir, "trace.csv")?, &run.outcome.trace)?;
    write_metrics_csv(create(dir, "metrics.csv")?, &run.outcome.metrics)?;
    fs::write(dir.join("summary.txt"), render_summary(cfg, &run.summary))?;
    if let Some(p) = &run.outcome.pipeline {
        p.write_csv(create(dir, "pipeline.csv")?)?;
        names.push("pipeline.csv".into());
    }
    if cfg.write_dataset {
        run.train.write_csv(create(dir, "dataset_train.csv")?)?;
        run.test.write_csv(create(dir, "dataset_test.csv")?)?;
        names.extend(["dataset_train.csv".into(), "dataset_test.csv".into()]);
    }
    if opts.dump_weights {
        write_weights(create(dir, "weights.bin")?, &run.shape, &run.outcome.weights)?;
        names.push("weights.bin".into());
    }
    Ok(names)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub name: String,
    pub trainer: String,
    pub executor: String,
    pub repeats: usize,
    pub wall_s_mean: f64,
    pub wall_s_std: f64,
    pub test_mse_mean: f64,
    pub test_mse_std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn compare(configs: &[ExperimentConfig], repeats: usize, strict: bool) -> Result<Vec<CompareRow>> {
    let opts = RunOptions { strict, ..Default::default() };
    configs
        .iter()
        .map(|cfg| {
            let mut wall = Vec::with_capacity(repeats);
            let mut err = Vec::with_capacity(repeats);
            for r in 0..repeats {
                let run = run_experiment(cfg, &opts).with_context(|| format!("{} (repeat {})", cfg.name, r + 1))?;
                wall.push(run.summary.wall_ns as f64 * 1e-9);
                err.push(run.summary.final_test_mse);
            }
            let (wall_s_mean, wall_s_std) = mean_std(&wall);
            let (test_mse_mean, test_mse_std) = mean_std(&err);
            Ok(CompareRow {
                name: cfg.name.clone(),
                trainer: cfg.trainer.to_string(),
                executor: cfg.executor.to_string(),
                repeats,
                wall_s_mean,
                wall_s_std,
                test_mse_mean,
                test_mse_std,
            })
        })
        .collect()
}

pub const COMPARE_HEADER: [&str; 8] =
    ["name", "trainer", "executor", "repeats", "wall_s_mean", "wall_s_std", "test_mse_mean", "test_mse_std"];

pub fn render_table(rows: &[CompareRow]) -> String {
    let mut t = format!(
        "{:<20} {:<9} {:<9} {:>7} {:>22} {:>26}\n",
        "name", "trainer", "executor", "repeats", "wall time (s)", "final test MSE"
    );
    for r in rows {
        let _ = writeln!(
            t,
            "{:<20} {:<9} {:<9} {:>7} {:>10.4} ± {:<9.4} {:>12.6e} ± {:<11.4e}",
            r.name, r.trainer, r.executor, r.repeats, r.wall_s_mean, r.wall_s_std, r.test_mse_mean, r.test_mse_std
        );
    }
    t
}

pub fn write_compare_csv(path: &Path, rows: &[CompareRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(COMPARE_HEADER)?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.trainer.clone(),
            r.executor.clone(),
            r.repeats.to_string(),
            r.wall_s_mean.to_string(),
            r.wall_s_std.to_string(),
            r.test_mse_mean.to_string(),
            r.test_mse_std.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?)
}
