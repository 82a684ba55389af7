//! Command-line front end.
//!
//! Exit status: 0 on success, 2 on invalid input, 3 when results are
//! degraded (solver fallbacks or too many failed trials), 1 otherwise.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fdrelay::harness::{self, HarnessError, RunConfig};
use fdrelay::maxmin::{Diagnostics, MaxMinError};
use fdrelay::parallel::Execution;
use fdrelay::{sample_realization, solve_maxmin, NetworkConfig, ZfcMode};

#[derive(Parser)]
#[command(name = "fdrelay", version, about = "Max-min relay beamforming for full-duplex two-way relays")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration: JSON, or `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output file (CSV for sweeps, JSON otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one realization and print the result as JSON.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Realization index within the seed's stream.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        n: Option<usize>,
        /// Total power in dBW; applies the configured power split.
        #[arg(long, allow_negative_numbers = true)]
        pt_dbw: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        rsi_db: Option<f64>,
        #[arg(long)]
        mode: Option<ZfcMode>,
    },
    /// Monte Carlo sweep over the configured grid; writes CSV plus a JSON sidecar.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Run trials one after another.
        #[arg(long)]
        sequential: bool,
        /// Also run the random-search oracle on every trial.
        #[arg(long)]
        oracle: bool,
    },
    /// Per-stage wall-clock timing table.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Compare a sweep against an external baseline CSV (`pt_dbw,mean_rate`).
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        baseline: PathBuf,
        /// Existing sweep CSV; when absent a sweep is run from the config.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_negative_numbers = true)]
        rsi_db: f64,
    },
}

enum Failure {
    Invalid(String),
    Other(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Validation(_) | HarnessError::Parse { .. } | HarnessError::DisjointGrids { .. } | HarnessError::MissingSeries { .. } => {
                Failure::Invalid(e.to_string())
            }
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<MaxMinError> for Failure {
    fn from(e: MaxMinError) -> Self {
        match e {
            MaxMinError::Config(_) | MaxMinError::InvalidArgument(_) => Failure::Invalid(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut rc = match &common.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        rc.base.seed = seed;
    }
    if let Some(trials) = common.trials {
        rc.trials = trials;
    }
    Ok(rc)
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Other(e.to_string()))?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Failure::Other(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SolveOutput {
    config: NetworkConfig,
    trial: u64,
    j_up: f64,
    j_max: f64,
    j_lower: f64,
    rate_upper_bits: f64,
    rate_lower_bits: f64,
    per_user_sinr: [f64; 2],
    rank_ratio: f64,
    relay_power_used: f64,
    zfc_residual: f64,
    /// `w = vec(W^H)` as `[re, im]` pairs.
    w: Vec<[f64; 2]>,
    degraded: bool,
    diagnostics: Diagnostics,
}

fn solve(common: &Common, trial: u64, n: Option<usize>, pt_dbw: Option<f64>, rsi_db: Option<f64>, mode: Option<ZfcMode>) -> Result<bool, Failure> {
    let rc = load_config(common)?;
    let mut cfg = rc.base.clone();
    if let Some(n) = n {
        cfg.n = n;
    }
    if let Some(rsi) = rsi_db {
        cfg.rsi_db = rsi;
    }
    if let Some(pt) = pt_dbw {
        cfg = rc.cell_config(cfg.n, cfg.rsi_db, pt);
    }
    if let Some(mode) = mode {
        cfg.zfc_mode = mode;
    }
    let ch = sample_realization(&cfg, trial).map_err(|e| Failure::Invalid(e.to_string()))?;
    let r = solve_maxmin(&cfg, &ch)?;
    let degraded = r.degraded();
    let out = SolveOutput {
        config: cfg,
        trial,
        j_up: r.j_up,
        j_max: r.j_max,
        j_lower: r.j_lower,
        rate_upper_bits: r.rate_upper_bits,
        rate_lower_bits: r.rate_lower_bits,
        per_user_sinr: r.per_user_sinr,
        rank_ratio: r.rank_ratio,
        relay_power_used: r.relay_power_used,
        zfc_residual: r.zfc_residual,
        w: r.w.iter().map(|z| [z.re, z.im]).collect(),
        degraded,
        diagnostics: r.diagnostics,
    };
    write_json(&out, common.out.as_deref())?;
    Ok(degraded)
}

fn sweep(common: &Common, workers: Option<usize>, sequential: bool, oracle: bool) -> Result<bool, Failure> {
    let mut rc = load_config(common)?;
    if let Some(w) = workers {
        rc.workers = w;
    }
    if sequential {
        rc.execution = Execution::Sequential;
    }
    if oracle {
        rc.oracle_enabled = true;
    }
    if let Some(out) = &common.out {
        rc.output_path = Some(out.clone());
    }
    let report = harness::run_sweep(&rc)?;
    match &rc.output_path {
        Some(path) => {
            harness::write_report(&report, path)?;
            eprintln!("wrote {} and {}", path.display(), harness::sidecar_path(path).display());
        }
        None => print!("{}", harness::to_csv(&report)),
    }
    Ok(report.degraded())
}

fn bench(common: &Common) -> Result<bool, Failure> {
    let mut rc = load_config(common)?;
    // a full 1000-trial grid is far more than timing needs
    if common.trials.is_none() {
        rc.trials = 5;
    }
    let table = harness::bench(&rc)?;
    print!("{table}");
    if let Some(out) = &common.out {
        write_json(&table, Some(out))?;
    }
    Ok(false)
}

fn compare(common: &Common, baseline: &Path, report: Option<&Path>, n: usize, rsi_db: f64) -> Result<bool, Failure> {
    let sr = match report {
        Some(p) => harness::read_report(p)?,
        None => harness::run_sweep(&load_config(common)?)?,
    };
    let base = harness::read_baseline(baseline)?;
    let cmp = harness::merge_baseline(&sr, &base, n, rsi_db)?;
    print!("{cmp}");
    if let Some(out) = &common.out {
        write_json(&cmp, Some(out))?;
    }
    Ok(sr.degraded())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Solve { common, trial, n, pt_dbw, rsi_db, mode } => solve(common, *trial, *n, *pt_dbw, *rsi_db, *mode),
        Command::Sweep { common, workers, sequential, oracle } => sweep(common, *workers, *sequential, *oracle),
        Command::Bench { common } => bench(common),
        Command::Compare { common, baseline, report, n, rsi_db } => compare(common, baseline, report.as_deref(), *n, *rsi_db),
    };
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("warning: results are degraded");
            ExitCode::from(3)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
