use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fcresnet_admm_cli::runner::write_compare_csv;
use fcresnet_admm_cli::{compare, render_table, run_experiment, write_artifacts, ConfigError, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "fcadmm", version, about = "ADMM and gradient training experiments for FCResNets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train once and write trace.csv, metrics.csv and summary.txt.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the final weights to weights.bin.
        #[arg(long)]
        dump_weights: bool,
        /// Abort when a convergence assumption on the hyperparameters fails.
        #[arg(long)]
        strict_assumptions: bool,
    },
    /// Run each config several times and tabulate wall time and test MSE.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        repeats: u64,
        /// Directory for compare.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        strict_assumptions: bool,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentConfig::parse(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Run { config, out, dump_weights, strict_assumptions } => {
            let cfg = load(&config)?;
            let opts = RunOptions { out, dump_weights, strict: strict_assumptions };
            log::info!("running {} ({} iterations)", cfg.name, cfg.iterations);
            let run = run_experiment(&cfg, &opts)?;
            let dir = opts.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
            let files = write_artifacts(&dir, &cfg, &run, &opts)?;
            let s = &run.summary;
            println!(
                "{}: k={} train_mse={:.6e} test_mse={:.6e} kkt={:.3e} wall={:.3}s",
                cfg.name,
                s.final_k,
                s.final_train_mse,
                s.final_test_mse,
                s.final_kkt,
                s.wall_ns as f64 * 1e-9
            );
            if let Some(d) = s.parallel_vs_serial {
                println!("parallel vs serial max-abs weight difference: {d:e}");
            }
            println!("wrote {} to {}", files.join(", "), dir.display());
            Ok(())
        }
        Cmd::Compare { configs, repeats, out, strict_assumptions } => {
            let cfgs = configs.iter().map(|p| load(p)).collect::<Result<Vec<_>>>()?;
            let rows = compare(&cfgs, repeats as usize, strict_assumptions)?;
            print!("{}", render_table(&rows));
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                write_compare_csv(&dir.join("compare.csv"), &rows)?;
            }
            Ok(())
        }
    }
}
