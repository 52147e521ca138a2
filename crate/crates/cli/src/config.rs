//! Experiment configuration: a flat `key = value` file with dotted section
//! names. See `configs/README.md` for the full key list.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use fcresnet_admm::admm2::{Admm2Hyper, Prox2};
use fcresnet_admm::admm3::{Admm3Hyper, Prox3};
use fcresnet_admm::baselines::OptimizerConfig;
use fcresnet_admm::model::{Activation, Init};
use fcresnet_admm::schedule::Schedule;
use fcresnet_admm::train::{Batching, Executor, Trainer};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// Offending key, or `line N` for syntax errors.
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    L1,
    Oscillation,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::L1 => "l1",
            Task::Oscillation => "oscillation",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "l1" => Ok(Task::L1),
            "oscillation" => Ok(Task::Oscillation),
            _ => Err(format!("unknown task '{s}' (expected l1 or oscillation)")),
        }
    }
}

/// Hyperparameters of the selected trainer.
#[derive(Debug, Clone, PartialEq)]
pub enum Hyper {
    Admm2(Admm2Hyper),
    Admm3(Admm3Hyper),
    Gradient(OptimizerConfig),
}

impl Hyper {
    /// λ of the objective reported in the summary (the L2 weight for baselines).
    pub fn lambda(&self) -> f64 {
        match self {
            Hyper::Admm2(h) => h.lambda,
            Hyper::Admm3(h) => h.lambda,
            Hyper::Gradient(c) => c.l2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: Task,
    pub d: usize,
    pub n_samples: usize,
    pub split_ratio: f64,
    pub seed: u64,
    pub n_layers: usize,
    pub activation: Activation,
    pub init: Init,
    pub trainer: Trainer,
    pub executor: Executor,
    pub iterations: usize,
    pub batching: Batching,
    pub hyper: Hyper,
    pub out_dir: PathBuf,
    pub write_dataset: bool,
    /// Real per-step timings in trace.csv; off keeps traces byte-reproducible.
    pub wall_clock: bool,
}

const COMMON_KEYS: [&str; 16] = [
    "name",
    "task",
    "seed",
    "data.d",
    "data.n_samples",
    "data.split_ratio",
    "network.layers",
    "network.activation",
    "network.init",
    "trainer.kind",
    "trainer.executor",
    "trainer.iterations",
    "trainer.batching",
    "output.dir",
    "output.dataset",
    "output.wall_clock",
];

fn hyper_keys(trainer: Trainer) -> &'static [&'static str] {
    match trainer {
        Trainer::Admm2Pg => &["lambda", "mu", "beta", "tau", "iota"],
        Trainer::Admm2Pp => &["lambda", "mu", "beta", "omega", "nu", "inner_tol", "inner_max_iter"],
        Trainer::Admm3Pg => &["lambda", "mu", "beta", "tau", "vmax", "eps_hat", "eps", "u_tol"],
        Trainer::Admm3Pp => &["lambda", "mu", "beta", "omega", "vmax", "eps_hat", "eps", "u_tol"],
        Trainer::Sgd => &["lr", "lr_decay", "batch_size", "l2"],
        Trainer::Sgdm => &["lr", "momentum", "lr_decay", "batch_size", "l2"],
        Trainer::Adam => &["lr", "beta1", "beta2", "eps", "lr_decay", "batch_size", "l2"],
    }
}

/// Raw `key -> (line, value)` pairs.
fn tokenize(text: &str) -> Result<BTreeMap<String, (usize, String)>, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::new(format!("line {line_no}"), format!("expected `key = value`, got `{line}`")));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::new(format!("line {line_no}"), "empty key or value"));
        }
        if let Some((first, _)) = map.insert(k.to_string(), (line_no, v.to_string())) {
            return Err(ConfigError::new(k, format!("set twice (lines {first} and {line_no})")));
        }
    }
    Ok(map)
}

struct Fields {
    map: BTreeMap<String, (usize, String)>,
}

impl Fields {
    fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.map.remove(key) {
            None => Ok(default),
            Some((_, v)) => v.parse().map_err(|e| ConfigError::new(key, format!("invalid value `{v}`: {e}"))),
        }
    }

    /// Comma list of floats; a single value is repeated `len` times.
    fn list(&mut self, key: &str, len: usize) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some((_, v)) = self.map.remove(key) else { return Ok(None) };
        let vals = v
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError::new(key, format!("invalid list `{v}`: {e}")))?;
        match vals.len() {
            1 => Ok(Some(vec![vals[0]; len])),
            l if l == len => Ok(Some(vals)),
            l => Err(ConfigError::new(key, format!("expected 1 or {len} values, got {l}"))),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::new(key, format!("must be positive and finite, got {v}")))
    }
}

fn parse_batching(v: &str) -> Result<Batching, String> {
    if v == "full" {
        return Ok(Batching::Full);
    }
    match v.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected `full` or a positive batch size, got `{v}`")),
        Ok(b) => Ok(Batching::Batches(b)),
    }
}

/// Defaults are the published presets; the point variants reuse them with
/// unit proximal weights (2s) or ω ≡ 10 (3s).
fn default_hyper(trainer: Trainer, n_layers: usize) -> Hyper {
    match trainer {
        Trainer::Admm2Pg => Hyper::Admm2(Admm2Hyper::preset_prox_grad()),
        Trainer::Admm2Pp => {
            let p = Admm2Hyper::preset_prox_grad();
            Hyper::Admm2(Admm2Hyper::prox_point(p.lambda, p.mu, p.beta, 1.0, 1.0))
        }
        Trainer::Admm3Pg => Hyper::Admm3(Admm3Hyper::preset_prox_grad(n_layers)),
        Trainer::Admm3Pp => Hyper::Admm3(Admm3Hyper {
            prox: Prox3::Point { omega: Schedule::Constant(10.0) },
            ..Admm3Hyper::preset_prox_grad(n_layers)
        }),
        Trainer::Sgd | Trainer::Sgdm | Trainer::Adam => {
            Hyper::Gradient(OptimizerConfig::preset(trainer.optimizer().expect("gradient trainer")))
        }
    }
}

fn schedule(f: &mut Fields, key: &str, default: Schedule) -> Result<Schedule, ConfigError> {
    f.get(key, default)
}

fn parse_hyper(f: &mut Fields, trainer: Trainer, n_layers: usize) -> Result<Hyper, ConfigError> {
    let h = |k: &str| format!("hyper.{k}");
    match default_hyper(trainer, n_layers) {
        Hyper::Admm2(mut p) => {
            p.lambda = positive(&h("lambda"), f.get(&h("lambda"), p.lambda)?)?;
            p.mu = positive(&h("mu"), f.get(&h("mu"), p.mu)?)?;
            p.beta = positive(&h("beta"), f.get(&h("beta"), p.beta)?)?;
            p.prox = match p.prox {
                Prox2::Grad { tau, iota } => {
                    Prox2::Grad { tau: schedule(f, &h("tau"), tau)?, iota: schedule(f, &h("iota"), iota)? }
                }
                Prox2::Point { omega, nu } => {
                    Prox2::Point { omega: schedule(f, &h("omega"), omega)?, nu: schedule(f, &h("nu"), nu)? }
                }
            };
            p.inner.tol = positive(&h("inner_tol"), f.get(&h("inner_tol"), p.inner.tol)?)?;
            p.inner.max_iter = f.get(&h("inner_max_iter"), p.inner.max_iter)?;
            Ok(Hyper::Admm2(p))
        }
        Hyper::Admm3(mut p) => {
            p.lambda = positive(&h("lambda"), f.get(&h("lambda"), p.lambda)?)?;
            p.mu = positive(&h("mu"), f.get(&h("mu"), p.mu)?)?;
            if let Some(b) = f.list(&h("beta"), n_layers)? {
                for v in &b {
                    positive(&h("beta"), *v)?;
                }
                p.beta = b;
            }
            p.prox = match p.prox {
                Prox3::Grad { tau } => Prox3::Grad { tau: schedule(f, &h("tau"), tau)? },
                Prox3::Point { omega } => Prox3::Point { omega: schedule(f, &h("omega"), omega)? },
            };
            p.vmax = f.list(&h("vmax"), n_layers)?;
            p.eps_hat = f.list(&h("eps_hat"), n_layers.saturating_sub(1))?;
            p.eps = f.list(&h("eps"), n_layers.saturating_sub(1))?;
            p.u_tol = positive(&h("u_tol"), f.get(&h("u_tol"), p.u_tol)?)?;
            Ok(Hyper::Admm3(p))
        }
        Hyper::Gradient(mut c) => {
            c.lr = f.get(&h("lr"), c.lr)?;
            c.momentum = f.get(&h("momentum"), c.momentum)?;
            c.beta1 = f.get(&h("beta1"), c.beta1)?;
            c.beta2 = f.get(&h("beta2"), c.beta2)?;
            c.eps = f.get(&h("eps"), c.eps)?;
            c.lr_decay = f.get(&h("lr_decay"), c.lr_decay)?;
            c.batch_size = f.get(&h("batch_size"), c.batch_size)?;
            c.l2 = f.get(&h("l2"), c.l2)?;
            c.validate().map_err(|e| ConfigError::new("hyper", e.to_string()))?;
            Ok(Hyper::Gradient(c))
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let map = tokenize(text)?;
        let trainer: Trainer = match map.get("trainer.kind") {
            None => return Err(ConfigError::new("trainer.kind", "required")),
            Some((_, v)) => v.parse().map_err(|e: fcresnet_admm::Error| ConfigError::new("trainer.kind", e.to_string()))?,
        };
        let allowed = hyper_keys(trainer);
        for key in map.keys() {
            if let Some(rest) = key.strip_prefix("hyper.") {
                if !allowed.contains(&rest) {
                    return Err(ConfigError::new(
                        key,
                        format!("not a parameter of trainer {trainer} (allowed: {})", allowed.join(", ")),
                    ));
                }
            } else if !COMMON_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::new(key, "unknown key"));
            }
        }

        let mut f = Fields { map };
        f.map.remove("trainer.kind");
        let name = f.get("name", trainer.name().to_string())?;
        let task = f.get("task", Task::L1)?;
        let seed = f.get("seed", 0u64)?;
        let d = f.get("data.d", 2usize)?;
        if d == 0 {
            return Err(ConfigError::new("data.d", "must be at least 1"));
        }
        let n_samples = f.get("data.n_samples", 1000usize)?;
        let split_ratio = f.get("data.split_ratio", 0.8f64)?;
        if !(split_ratio > 0.0 && split_ratio < 1.0) {
            return Err(ConfigError::new("data.split_ratio", format!("must lie in (0, 1), got {split_ratio}")));
        }
        let train_n = (split_ratio * n_samples as f64).floor() as usize;
        if train_n == 0 || train_n == n_samples {
            return Err(ConfigError::new("data.n_samples", "split leaves the train or test set empty"));
        }
        let n_layers = f.get("network.layers", 3usize)?;
        if n_layers < 2 {
            return Err(ConfigError::new("network.layers", "need at least 2 layers"));
        }
        let activation = f.get("network.activation", Activation::Sigmoid)?;
        let init = f.get("network.init", Init::KaimingNormal)?;
        let executor = f.get("trainer.executor", Executor::Serial)?;
        if executor == Executor::Parallel && !trainer.is_admm() {
            return Err(ConfigError::new("trainer.executor", format!("parallel executor requires an ADMM trainer, not {trainer}")));
        }
        let iterations = f.get("trainer.iterations", 100usize)?;
        let batching = match f.map.remove("trainer.batching") {
            None => Batching::Full,
            Some(_) if !trainer.is_admm() => {
                return Err(ConfigError::new("trainer.batching", "gradient trainers take hyper.batch_size instead"))
            }
            Some((_, v)) => parse_batching(&v).map_err(|e| ConfigError::new("trainer.batching", e))?,
        };
        if executor == Executor::Parallel && batching != Batching::Full {
            return Err(ConfigError::new("trainer.batching", "the parallel executor runs full-batch only"));
        }
        let hyper = parse_hyper(&mut f, trainer, n_layers)?;
        let out_dir = f.get("output.dir", PathBuf::from("out"))?;
        let write_dataset = f.get("output.dataset", false)?;
        let wall_clock = f.get("output.wall_clock", false)?;
        debug_assert!(f.map.is_empty(), "unconsumed keys: {:?}", f.map.keys());
        Ok(Self {
            name,
            task,
            d,
            n_samples,
            split_ratio,
            seed,
            n_layers,
            activation,
            init,
            trainer,
            executor,
            iterations,
            batching,
            hyper,
            out_dir,
            write_dataset,
            wall_clock,
        })
    }
}
