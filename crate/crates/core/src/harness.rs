//! Monte Carlo sweeps, CSV/JSON reports, baseline comparison and timing.
//!
//! A sweep visits every `(n, rsi, P_T)` cell of a [`RunConfig`] and solves
//! `trials` independent realizations per cell. Realization `t` of every cell
//! uses channel stream `(seed, t)`, so cells that differ only in power or RSI
//! level see the same underlying Gaussian draws.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::{sample_realization, NetworkConfig};
use crate::lift::build_lifted;
use crate::maxmin::{solve_maxmin_with, StageTimes};
use crate::oracle;
use crate::parallel::{self, Execution};
use crate::sdp::InteriorPoint;

/// Exact header of the sweep CSV.
pub const CSV_HEADER: &str = "n,rsi_db,pt_dbw,mean_rate_upper,mean_rate_lower,mean_gap,trials,failures";
/// A cell is flagged degraded above this failure fraction.
pub const DEGRADED_FRACTION: f64 = 0.10;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("baseline grid {baseline:?} shares no point with report grid {report:?}")]
    DisjointGrids { report: Vec<f64>, baseline: Vec<f64> },
    #[error("report has no series n = {n}, rsi = {rsi_db} dB")]
    MissingSeries { n: usize, rsi_db: f64 },
}

impl HarnessError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
        move |source| HarnessError::Io { path: path.to_path_buf(), source }
    }
}

/// Fractions of the total power given to each node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSplit {
    pub source1: f64,
    pub source2: f64,
    pub relay: f64,
}

impl Default for PowerSplit {
    fn default() -> Self {
        Self { source1: 0.25, source2: 0.25, relay: 0.5 }
    }
}

/// Everything that defines a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Template for every cell; `n`, `rsi_db` and the powers are overwritten per cell.
    pub base: NetworkConfig,
    pub pt_grid_dbw: Vec<f64>,
    pub trials: usize,
    pub rsi_levels_db: Vec<f64>,
    pub n_values: Vec<usize>,
    pub split: PowerSplit,
    pub oracle_enabled: bool,
    pub oracle_samples: usize,
    /// Worker threads for parallel execution (0 = all cores).
    pub workers: usize,
    pub execution: Execution,
    pub output_path: Option<PathBuf>,
    pub baseline_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            base: NetworkConfig::default(),
            pt_grid_dbw: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            trials: 1000,
            rsi_levels_db: vec![-10.0, -40.0],
            n_values: vec![2, 3],
            split: PowerSplit::default(),
            oracle_enabled: false,
            oracle_samples: 10_000,
            workers: 0,
            execution: Execution::default(),
            output_path: None,
            baseline_path: None,
        }
    }
}

/// Linear watts from dBW.
pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

impl RunConfig {
    /// Network configuration of one cell.
    pub fn cell_config(&self, n: usize, rsi_db: f64, pt_dbw: f64) -> NetworkConfig {
        let pt = dbw_to_watts(pt_dbw);
        NetworkConfig {
            n,
            rsi_db,
            total_power: pt,
            p1: self.split.source1 * pt,
            p2: self.split.source2 * pt,
            relay_power: self.split.relay * pt,
            ..self.base.clone()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut errs = Vec::new();
        if self.trials == 0 {
            errs.push("trials must be at least 1".to_string());
        }
        for (name, empty) in [
            ("pt_grid_dbw", self.pt_grid_dbw.is_empty()),
            ("rsi_levels_db", self.rsi_levels_db.is_empty()),
            ("n_values", self.n_values.is_empty()),
        ] {
            if empty {
                errs.push(format!("{name} must not be empty"));
            }
        }
        if self.pt_grid_dbw.iter().chain(&self.rsi_levels_db).any(|x| !x.is_finite()) {
            errs.push("grid values must be finite".to_string());
        }
        let s = self.split;
        if !(s.source1 > 0.0 && s.source2 > 0.0 && s.relay > 0.0) || s.source1 + s.source2 + s.relay > 1.0 + 1e-12 {
            errs.push("power split fractions must be positive and sum to at most 1".to_string());
        }
        if self.oracle_enabled && self.oracle_samples == 0 {
            errs.push("oracle_samples must be at least 1".to_string());
        }
        if errs.is_empty() {
            // per-cell checks only make sense once the grids are sane
            for &n in &self.n_values {
                for &rsi in &self.rsi_levels_db {
                    for &pt in &self.pt_grid_dbw {
                        if let Err(e) = self.cell_config(n, rsi, pt).validate() {
                            for m in e.0 {
                                let m = format!("cell (n={n}, rsi={rsi}, pt={pt}): {m}");
                                if !errs.contains(&m) {
                                    errs.push(m);
                                }
                            }
                        }
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Validation(errs))
        }
    }

    /// SHA-256 over the canonical JSON of the fields that determine results.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_path = None;
        canonical.baseline_path = None;
        canonical.workers = 0;
        canonical.execution = Execution::default();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Loads a JSON file, or a `key = value` file when the content is not JSON.
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
        if text.trim_start().starts_with('{') {
            return serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
                path: path.to_path_buf(),
                line: e.line(),
                message: e.to_string(),
            });
        }
        parse_key_values(&text).map_err(|(line, message)| HarnessError::Parse { path: path.to_path_buf(), line, message })
    }
}

const TOP_LEVEL_KEYS: &[&str] = &[
    "pt_grid_dbw",
    "trials",
    "rsi_levels_db",
    "n_values",
    "oracle_enabled",
    "oracle_samples",
    "workers",
    "execution",
    "output_path",
    "baseline_path",
];

/// `key = value` lines; `#` starts a comment. Lists are comma separated,
/// optionally bracketed. Keys of [`NetworkConfig`] may be written bare or
/// as `base.key`; split fractions as `split.relay` etc.
fn parse_key_values(text: &str) -> Result<RunConfig, (usize, String)> {
    use serde_json::{Map, Value};
    let mut top = Map::new();
    let mut base = Map::new();
    let mut split = Map::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or((line_no, format!("expected key = value, got {line:?}")))?;
        let key = key.trim();
        let value = parse_value(value.trim());
        let target = if let Some(k) = key.strip_prefix("base.") {
            base.insert(k.to_string(), value)
        } else if let Some(k) = key.strip_prefix("split.") {
            split.insert(k.to_string(), value)
        } else if TOP_LEVEL_KEYS.contains(&key) {
            top.insert(key.to_string(), value)
        } else {
            base.insert(key.to_string(), value)
        };
        if target.is_some() {
            return Err((line_no, format!("duplicate key {key}")));
        }
    }
    // sigma2_user may be given as a single number for both users
    if let Some(Value::Number(x)) = base.get("sigma2_user").cloned() {
        base.insert("sigma2_user".into(), Value::Array(vec![Value::Number(x.clone()), Value::Number(x)]));
    }
    // grids may be given as a single value
    for key in ["pt_grid_dbw", "rsi_levels_db", "n_values"] {
        if let Some(v) = top.get_mut(key) {
            if !v.is_array() {
                *v = Value::Array(vec![v.take()]);
            }
        }
    }
    top.insert("base".into(), Value::Object(base));
    top.insert("split".into(), Value::Object(split));
    serde_json::from_value(Value::Object(top)).map_err(|e| (0, e.to_string()))
}

fn parse_value(s: &str) -> serde_json::Value {
    use serde_json::Value;
    if let Ok(v) = serde_json::from_str::<Value>(s) {
        return v;
    }
    let inner = s.strip_prefix('[').and_then(|t| t.strip_suffix(']')).unwrap_or(s);
    if inner.contains(',') {
        return Value::Array(inner.split(',').map(|p| parse_value(p.trim())).collect());
    }
    let unquoted = s.trim_matches('"');
    match unquoted {
        "" if s.starts_with('[') => Value::Array(vec![]),
        _ => Value::String(unquoted.to_string()),
    }
}

// ---------------------------------------------------------------------------
// sweep

/// Outcome of one trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub rate_upper: f64,
    pub rate_lower: f64,
    pub j_up: f64,
    pub j_max: f64,
    pub j_lower: f64,
    pub bisection_iterations: usize,
    pub failed: bool,
    pub error: Option<String>,
    /// Random-search value when the oracle is enabled.
    pub j_oracle: Option<f64>,
    pub seconds: f64,
}

/// Aggregates of one `(n, rsi, P_T)` cell. Means exclude failed trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub rsi_db: f64,
    pub pt_dbw: f64,
    pub mean_rate_upper: f64,
    pub mean_rate_lower: f64,
    pub mean_gap: f64,
    pub trials: usize,
    pub failures: usize,
    /// Sample standard deviation of `rate_upper`.
    #[serde(default)]
    pub std_rate_upper: f64,
    #[serde(default)]
    pub std_rate_lower: f64,
    #[serde(default)]
    pub mean_bisection_iterations: f64,
    #[serde(default)]
    pub mean_seconds: f64,
    #[serde(default)]
    pub max_seconds: f64,
    /// Trials where the oracle beat `j_max` by more than `1e-6`.
    #[serde(default)]
    pub oracle_violations: usize,
    #[serde(default)]
    pub mean_oracle_rate: Option<f64>,
}

impl CellSummary {
    pub fn degraded(&self) -> bool {
        self.failures as f64 > DEGRADED_FRACTION * self.trials as f64
    }

    fn from_records(n: usize, rsi_db: f64, pt_dbw: f64, records: &[TrialRecord]) -> Self {
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| !r.failed).collect();
        let mean = |f: &dyn Fn(&TrialRecord) -> f64| -> f64 {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        let std = |f: &dyn Fn(&TrialRecord) -> f64, m: f64| -> f64 {
            if ok.len() < 2 {
                0.0
            } else {
                (ok.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
            }
        };
        let mean_rate_upper = mean(&|r| r.rate_upper);
        let mean_rate_lower = mean(&|r| r.rate_lower);
        let oracle: Vec<f64> = ok.iter().filter_map(|r| r.j_oracle.map(|j| (1.0 + j).log2())).collect();
        Self {
            n,
            rsi_db,
            pt_dbw,
            mean_rate_upper,
            mean_rate_lower,
            mean_gap: mean(&|r| r.rate_upper - r.rate_lower),
            trials: records.len(),
            failures: records.len() - ok.len(),
            std_rate_upper: std(&|r| r.rate_upper, mean_rate_upper),
            std_rate_lower: std(&|r| r.rate_lower, mean_rate_lower),
            mean_bisection_iterations: mean(&|r| r.bisection_iterations as f64),
            mean_seconds: records.iter().map(|r| r.seconds).sum::<f64>() / records.len().max(1) as f64,
            max_seconds: records.iter().map(|r| r.seconds).fold(0.0, f64::max),
            oracle_violations: ok.iter().filter(|r| r.j_oracle.is_some_and(|j| j > r.j_max + 1e-6)).count(),
            mean_oracle_rate: (!oracle.is_empty()).then(|| oracle.iter().sum::<f64>() / oracle.len() as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub meta: ReportMeta,
    pub cells: Vec<CellSummary>,
}

impl SweepReport {
    pub fn degraded(&self) -> bool {
        self.cells.iter().any(CellSummary::degraded)
    }

    /// Cells of one `(n, rsi)` series in grid order.
    pub fn series(&self, n: usize, rsi_db: f64) -> Vec<&CellSummary> {
        self.cells.iter().filter(|c| c.n == n && c.rsi_db == rsi_db).collect()
    }
}

/// Solves one trial of one cell.
pub fn run_trial(cfg: &NetworkConfig, trial_index: u64, oracle_samples: Option<usize>) -> TrialRecord {
    let start = Instant::now();
    let mut rec = TrialRecord {
        trial_index,
        rate_upper: 0.0,
        rate_lower: 0.0,
        j_up: 0.0,
        j_max: 0.0,
        j_lower: 0.0,
        bisection_iterations: 0,
        failed: true,
        error: None,
        j_oracle: None,
        seconds: 0.0,
    };
    let outcome = sample_realization(cfg, trial_index)
        .map_err(|e| e.to_string())
        .and_then(|ch| solve_maxmin_with(cfg, &ch, &InteriorPoint, &mut None).map(|r| (ch, r)).map_err(|e| e.to_string()));
    match outcome {
        Ok((ch, r)) => {
            rec.rate_upper = r.rate_upper_bits;
            rec.rate_lower = r.rate_lower_bits;
            rec.j_up = r.j_up;
            rec.j_max = r.j_max;
            rec.j_lower = r.j_lower;
            rec.bisection_iterations = r.diagnostics.bisection_iterations;
            rec.failed = r.degraded();
            if rec.failed {
                rec.error = Some(format!("degraded: {:?}", r.diagnostics.recovery_method));
            }
            if let Some(samples) = oracle_samples {
                // the oracle stream is independent of the recovery stream
                let seed = cfg.seed ^ 0x4f52_4143_4c45;
                rec.j_oracle = build_lifted(cfg, &ch)
                    .ok()
                    .and_then(|lp| oracle::brute_force_with(&lp, samples, seed.wrapping_add(trial_index), cfg.zfc_mode, Execution::Sequential).ok())
                    .map(|o| o.j_bf);
            }
        }
        Err(e) => rec.error = Some(e),
    }
    rec.seconds = start.elapsed().as_secs_f64();
    rec
}

/// Runs every cell of `rc`. Cells are ordered by `n`, then RSI level, then
/// power, each in the order given by the config.
pub fn run_sweep(rc: &RunConfig) -> Result<SweepReport, HarnessError> {
    rc.validate()?;
    let oracle_samples = rc.oracle_enabled.then_some(rc.oracle_samples);
    let mut cells = Vec::new();
    parallel::with_workers(rc.workers, || {
        for &n in &rc.n_values {
            for &rsi in &rc.rsi_levels_db {
                for &pt in &rc.pt_grid_dbw {
                    let cfg = rc.cell_config(n, rsi, pt);
                    let trials: Vec<u64> = (0..rc.trials as u64).collect();
                    let records = parallel::map(rc.execution, trials, |t| run_trial(&cfg, t, oracle_samples));
                    for r in records.iter().filter(|r| r.failed) {
                        log::warn!("n={n} rsi={rsi} pt={pt} trial {}: {}", r.trial_index, r.error.as_deref().unwrap_or("failed"));
                    }
                    let cell = CellSummary::from_records(n, rsi, pt, &records);
                    log::info!("n={n} rsi={rsi} pt={pt}: upper {:.4} lower {:.4} failures {}", cell.mean_rate_upper, cell.mean_rate_lower, cell.failures);
                    cells.push(cell);
                }
            }
        }
    });
    Ok(SweepReport {
        meta: ReportMeta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: rc.base.seed,
            config_hash: rc.config_hash(),
            config: rc.clone(),
        },
        cells,
    })
}

// ---------------------------------------------------------------------------
// report files

/// Sidecar path: `report.csv` → `report.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    version: String,
    seed: u64,
    config_hash: String,
    config: RunConfig,
    degraded: bool,
    cells: Vec<CellSummary>,
}

/// The CSV form of a report, header included.
pub fn to_csv(sr: &SweepReport) -> String {
    let mut csv = String::new();
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for c in &sr.cells {
        // `{}` on f64 prints the shortest string that parses back to the same value
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.n, c.rsi_db, c.pt_dbw, c.mean_rate_upper, c.mean_rate_lower, c.mean_gap, c.trials, c.failures
        ));
    }
    csv
}

/// Writes the CSV report and its JSON sidecar.
pub fn write_report(sr: &SweepReport, csv_path: &Path) -> Result<(), HarnessError> {
    write_file(csv_path, to_csv(sr).as_bytes())?;
    let sidecar = Sidecar {
        version: sr.meta.version.clone(),
        seed: sr.meta.seed,
        config_hash: sr.meta.config_hash.clone(),
        config: sr.meta.config.clone(),
        degraded: sr.degraded(),
        cells: sr.cells.clone(),
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    write_file(&sidecar_path(csv_path), json.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    }
    let mut f = fs::File::create(path).map_err(HarnessError::io(path))?;
    f.write_all(bytes).map_err(HarnessError::io(path))
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, s: &str) -> Result<T, HarnessError>
where
    T::Err: fmt::Display,
{
    s.trim().parse().map_err(|e: T::Err| HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("bad {name} {s:?}: {e}"),
    })
}

/// Reads a report written by [`write_report`]. The CSV is authoritative for
/// its eight columns; the sidecar, when present, supplies metadata and the
/// extra per-cell statistics.
pub fn read_report(csv_path: &Path) -> Result<SweepReport, HarnessError> {
    let text = fs::read_to_string(csv_path).map_err(HarnessError::io(csv_path))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        other => {
            return Err(HarnessError::Parse {
                path: csv_path.to_path_buf(),
                line: 1,
                message: format!("expected header {CSV_HEADER:?}, got {:?}", other.map(|(_, l)| l).unwrap_or("")),
            })
        }
    }
    let mut cells = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(HarnessError::Parse {
                path: csv_path.to_path_buf(),
                line: line_no,
                message: format!("expected 8 fields, found {}", f.len()),
            });
        }
        let p = csv_path;
        cells.push(CellSummary {
            n: parse_field(p, line_no, "n", f[0])?,
            rsi_db: parse_field(p, line_no, "rsi_db", f[1])?,
            pt_dbw: parse_field(p, line_no, "pt_dbw", f[2])?,
            mean_rate_upper: parse_field(p, line_no, "mean_rate_upper", f[3])?,
            mean_rate_lower: parse_field(p, line_no, "mean_rate_lower", f[4])?,
            mean_gap: parse_field(p, line_no, "mean_gap", f[5])?,
            trials: parse_field(p, line_no, "trials", f[6])?,
            failures: parse_field(p, line_no, "failures", f[7])?,
            std_rate_upper: 0.0,
            std_rate_lower: 0.0,
            mean_bisection_iterations: 0.0,
            mean_seconds: 0.0,
            max_seconds: 0.0,
            oracle_violations: 0,
            mean_oracle_rate: None,
        });
    }

    let side = sidecar_path(csv_path);
    let meta = if side.exists() {
        let text = fs::read_to_string(&side).map_err(HarnessError::io(&side))?;
        let sc: Sidecar = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Parse { path: side.clone(), line: e.line(), message: e.to_string() })?;
        if sc.cells.len() == cells.len() {
            for (c, extra) in cells.iter_mut().zip(&sc.cells) {
                if (c.n, c.rsi_db.to_bits(), c.pt_dbw.to_bits()) == (extra.n, extra.rsi_db.to_bits(), extra.pt_dbw.to_bits()) {
                    c.std_rate_upper = extra.std_rate_upper;
                    c.std_rate_lower = extra.std_rate_lower;
                    c.mean_bisection_iterations = extra.mean_bisection_iterations;
                    c.mean_seconds = extra.mean_seconds;
                    c.max_seconds = extra.max_seconds;
                    c.oracle_violations = extra.oracle_violations;
                    c.mean_oracle_rate = extra.mean_oracle_rate;
                }
            }
        }
        ReportMeta { version: sc.version, seed: sc.seed, config_hash: sc.config_hash, config: sc.config }
    } else {
        ReportMeta { version: String::new(), seed: 0, config_hash: String::new(), config: RunConfig::default() }
    };
    Ok(SweepReport { meta, cells })
}

// ---------------------------------------------------------------------------
// baseline comparison

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub pt_dbw: f64,
    pub fd_rate_lower: Option<f64>,
    pub fd_rate_upper: Option<f64>,
    pub baseline_rate: Option<f64>,
    /// `fd_rate_lower - baseline_rate` where both exist.
    pub delta: Option<f64>,
    pub unmatched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub n: usize,
    pub rsi_db: f64,
    pub rows: Vec<ComparisonRow>,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
        writeln!(f, "# n = {}, rsi = {} dB", self.n, self.rsi_db)?;
        writeln!(f, "{:>8} {:>12} {:>12} {:>12} {:>12}  status", "pt_dbw", "fd_lower", "fd_upper", "baseline", "delta")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>8} {:>12} {:>12} {:>12} {:>12}  {}",
                r.pt_dbw,
                opt(r.fd_rate_lower),
                opt(r.fd_rate_upper),
                opt(r.baseline_rate),
                opt(r.delta),
                if r.unmatched { "unmatched" } else { "ok" }
            )?;
        }
        Ok(())
    }
}

/// Baseline points `(pt_dbw, mean_rate)` from a CSV with those two columns.
pub fn read_baseline(path: &Path) -> Result<Vec<(f64, f64)>, HarnessError> {
    let parse_err = |line: usize, message: String| HarnessError::Parse { path: path.to_path_buf(), line, message };
    let file = fs::File::open(path).map_err(HarnessError::io(path))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| parse_err(1, format!("missing column {name}")));
    let (ip, ir) = (col("pt_dbw")?, col("mean_rate")?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let get = |i: usize, name: &str| -> Result<f64, HarnessError> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>().map_err(|e| parse_err(line, format!("bad {name} {s:?}: {e}")))
        };
        out.push((get(ip, "pt_dbw")?, get(ir, "mean_rate")?));
    }
    Ok(out)
}

fn same_point(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Joins the `(n, rsi)` series of `sr` with a baseline on the power grid.
/// Points present on only one side are kept and flagged, never interpolated.
pub fn merge_baseline(sr: &SweepReport, baseline: &[(f64, f64)], n: usize, rsi_db: f64) -> Result<Comparison, HarnessError> {
    let series = sr.series(n, rsi_db);
    if series.is_empty() {
        return Err(HarnessError::MissingSeries { n, rsi_db });
    }
    let report_grid: Vec<f64> = series.iter().map(|c| c.pt_dbw).collect();
    let baseline_grid: Vec<f64> = baseline.iter().map(|b| b.0).collect();
    if !report_grid.iter().any(|&p| baseline_grid.iter().any(|&q| same_point(p, q))) {
        return Err(HarnessError::DisjointGrids { report: report_grid, baseline: baseline_grid });
    }
    let mut rows: BTreeMap<i64, ComparisonRow> = BTreeMap::new();
    // key on the grid value rounded far below any meaningful dBW step
    let key = |p: f64| (p * 1e6).round() as i64;
    for c in &series {
        rows.insert(
            key(c.pt_dbw),
            ComparisonRow {
                pt_dbw: c.pt_dbw,
                fd_rate_lower: Some(c.mean_rate_lower),
                fd_rate_upper: Some(c.mean_rate_upper),
                baseline_rate: None,
                delta: None,
                unmatched: true,
            },
        );
    }
    for &(pt, rate) in baseline {
        let row = rows.entry(key(pt)).or_insert(ComparisonRow {
            pt_dbw: pt,
            fd_rate_lower: None,
            fd_rate_upper: None,
            baseline_rate: None,
            delta: None,
            unmatched: true,
        });
        row.baseline_rate = Some(rate);
        if let Some(fd) = row.fd_rate_lower {
            row.delta = Some(fd - rate);
            row.unmatched = false;
        }
    }
    Ok(Comparison { n, rsi_db, rows: rows.into_values().collect() })
}

// ---------------------------------------------------------------------------
// timing

pub const STAGES: [&str; 4] = ["lift", "upper_bound", "bisection", "recovery"];

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub stage: &'static str,
    pub solves: usize,
    pub mean_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    /// Mean end-to-end seconds per solve, per `n`.
    pub per_solve: Vec<(usize, f64)>,
}

impl fmt::Display for BenchTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>3} {:<12} {:>7} {:>14} {:>14}", "n", "stage", "solves", "mean_s", "total_s")?;
        for r in &self.rows {
            writeln!(f, "{:>3} {:<12} {:>7} {:>14.6e} {:>14.6e}", r.n, r.stage, r.solves, r.mean_seconds, r.total_seconds)?;
        }
        for (n, s) in &self.per_solve {
            writeln!(f, "n = {n}: {s:.6e} s per solve")?;
        }
        Ok(())
    }
}

/// Sequential wall-clock per stage over every cell and trial of `rc`.
pub fn bench(rc: &RunConfig) -> Result<BenchTable, HarnessError> {
    rc.validate()?;
    let mut rows = Vec::new();
    let mut per_solve = Vec::new();
    for &n in &rc.n_values {
        let mut times = Some(StageTimes::default());
        let mut solves = 0;
        for &rsi in &rc.rsi_levels_db {
            for &pt in &rc.pt_grid_dbw {
                let cfg = rc.cell_config(n, rsi, pt);
                for t in 0..rc.trials as u64 {
                    let Ok(ch) = sample_realization(&cfg, t) else { continue };
                    if solve_maxmin_with(&cfg, &ch, &InteriorPoint, &mut times).is_ok() {
                        solves += 1;
                    }
                }
            }
        }
        let t = times.unwrap_or_default();
        let totals = [t.lift, t.upper_bound, t.bisection, t.recovery];
        for (stage, total) in STAGES.iter().zip(totals) {
            rows.push(BenchRow { n, stage, solves, mean_seconds: total / solves.max(1) as f64, total_seconds: total });
        }
        per_solve.push((n, totals.iter().sum::<f64>() / solves.max(1) as f64));
    }
    Ok(BenchTable { rows, per_solve })
}
