//! `opo-sim` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation error, 3 numerical
//! failure (total divergence, Fock truncation breach), 4 comparison failure.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::config::Config;
use crate::ensemble::{compare_series, divergence_scan, run_ensemble, Observable};
use crate::error::Error;
use crate::io::{cumulants_to_csv, read_series, scan_to_csv, series_to_csv, write_atomic};
use crate::noise::{sigma_cumulant_table, MIN_CUMULANT_SAMPLES};
use crate::oracle::oracle_series;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_COMPARISON: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "opo-sim", version, about = "Phase-space simulation of the degenerate OPO")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a trajectory ensemble and write the observable series.
    Simulate(RunArgs),
    /// Sample the σ noises and tabulate their cumulants up to third order.
    Cumulants(RunArgs),
    /// Solve the master equation on the run's output grid.
    Oracle(RunArgs),
    /// Maximum normalized deviation between two series files.
    Compare(CompareArgs),
    /// Sampling variance of the positive-W quadrature against the time step.
    ScanDt(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML config, or a JSON sidecar from an earlier run.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Overrides applied after the config file, e.g. run.n_traj=1000.
    #[arg(value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(short, long, default_value = ".")]
    pub output_dir: PathBuf,
    /// Shorthand for run.seed=N.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Base name of the output files (defaults to the subcommand).
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ObservableArg {
    Xa,
    NA,
    Xb,
}

impl From<ObservableArg> for Observable {
    fn from(o: ObservableArg) -> Self {
        match o {
            ObservableArg::Xa => Observable::Xa,
            ObservableArg::NA => Observable::Na,
            ObservableArg::Xb => Observable::Xb,
        }
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub series_a: PathBuf,
    pub series_b: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value = "xa")]
    pub observable: ObservableArg,
    #[arg(short, long, default_value = ".")]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub name: Option<String>,
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::Unsupported(_) | Error::Contract(_) | Error::Config(_) => {
            EXIT_VALIDATION
        }
        Error::Diverged
        | Error::AllDiverged { .. }
        | Error::NoConvergence { .. }
        | Error::Truncation { .. }
        | Error::Hermiticity(_) => EXIT_NUMERICAL,
        Error::Io(_) => EXIT_IO,
    }
}

pub fn run(cli: Cli) -> crate::Result<i32> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Cumulants(a) => cumulants(&a),
        Command::Oracle(a) => oracle(&a),
        Command::Compare(a) => compare(&a),
        Command::ScanDt(a) => scan_dt(&a),
    }
}

fn load_config(a: &RunArgs) -> crate::Result<Config> {
    let mut overrides = a.overrides.clone();
    if let Some(seed) = a.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    Ok(Config::load(a.config.as_deref(), &overrides)?.resolved())
}

struct Outputs {
    dir: PathBuf,
    base: String,
}

impl Outputs {
    fn new(dir: &Path, name: Option<&str>, default: &str) -> crate::Result<Self> {
        let base = name.unwrap_or(default).to_string();
        if base.is_empty() || base.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid output name {base:?}")));
        }
        Ok(Outputs {
            dir: dir.to_path_buf(),
            base,
        })
    }

    fn path(&self, ext: &str) -> PathBuf {
        self.dir.join(format!("{}.{ext}", self.base))
    }

    fn write(&self, ext: &str, contents: &[u8]) -> crate::Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let p = self.path(ext);
        write_atomic(&p, contents)?;
        Ok(p)
    }

    /// JSON sidecar: fixed metadata, the resolved config and `extra` fields.
    fn sidecar(&self, subcommand: &str, cfg: Option<&Config>, started: Instant, extra: Value) -> crate::Result<PathBuf> {
        let mut doc = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": format!("v{}", env!("CARGO_PKG_VERSION")),
            "subcommand": subcommand,
            "timestamp": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            "wall_time_s": started.elapsed().as_secs_f64(),
        });
        if let Some(c) = cfg {
            doc["config"] = serde_json::to_value(c).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let (Value::Object(d), Value::Object(x)) = (&mut doc, extra) {
            d.extend(x);
        }
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Config(e.to_string()))?;
        self.write("json", format!("{text}\n").as_bytes())
    }
}

fn simulate(a: &RunArgs) -> crate::Result<i32> {
    let started = Instant::now();
    let cfg = load_config(a)?;
    let run_cfg = cfg.run_config()?;
    let out = Outputs::new(&a.output_dir, a.name.as_deref(), "series")?;
    let series = run_ensemble(&run_cfg)?;
    let csv = out.write("csv", series_to_csv(&series).as_bytes())?;
    out.sidecar(
        "simulate",
        Some(&cfg),
        started,
        json!({
            "diverged_fraction": series.final_diverged_fraction(),
            "truncated": series.truncated,
            "points": series.len(),
            "outputs": [csv.file_name().map(|s| s.to_string_lossy())],
        }),
    )?;
    if series.truncated {
        let t = series.times.last().copied().unwrap_or(0.0);
        eprintln!(
            "error: {}",
            Error::AllDiverged {
                n_traj: run_cfg.n_traj,
                t: t + run_cfg.step.dt() * run_cfg.record_every as f64,
            }
        );
        return Ok(EXIT_NUMERICAL);
    }
    println!(
        "wrote {} ({} points, diverged fraction {})",
        csv.display(),
        series.len(),
        series.final_diverged_fraction()
    );
    Ok(EXIT_OK)
}

fn cumulants(a: &RunArgs) -> crate::Result<i32> {
    let started = Instant::now();
    let cfg = load_config(a)?;
    let n = cfg.cumulants.n_samples;
    if n < MIN_CUMULANT_SAMPLES as u64 {
        return Err(Error::InvalidParameter(format!(
            "cumulants.n_samples must be >= {MIN_CUMULANT_SAMPLES}, got {n}"
        )));
    }
    let sp = cfg.sigma_params()?;
    let out = Outputs::new(&a.output_dir, a.name.as_deref(), "cumulants")?;
    let table = sigma_cumulant_table(&sp, n, cfg.run.seed)?;
    let csv = out.write("csv", cumulants_to_csv(&table, cfg.model.kappa).as_bytes())?;
    let max_z = table.max_z_against_targets(cfg.model.kappa);
    out.sidecar(
        "cumulants",
        Some(&cfg),
        started,
        json!({
            "n_samples": table.n_samples,
            "max_z_against_targets": max_z,
            "outputs": [csv.file_name().map(|s| s.to_string_lossy())],
        }),
    )?;
    println!("wrote {} (max |z| against targets {max_z:.3})", csv.display());
    Ok(EXIT_OK)
}

fn oracle(a: &RunArgs) -> crate::Result<i32> {
    let started = Instant::now();
    let cfg = load_config(a)?;
    let model = cfg.model_params()?;
    let ocfg = cfg.oracle_config()?;
    let init = cfg.initial_state();
    let interval = cfg.run.dt * cfg.run.record_every as f64;
    if !(cfg.run.t_end.is_finite() && cfg.run.t_end > 0.0 && interval > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need t_end > 0 and dt·record_every > 0, got {} and {interval}",
            cfg.run.t_end
        )));
    }
    let out = Outputs::new(&a.output_dir, a.name.as_deref(), "oracle")?;
    let series = oracle_series(&model, init.alpha0, init.beta0, &ocfg, cfg.run.t_end, interval)?;
    let csv = out.write("csv", series_to_csv(&series).as_bytes())?;
    out.sidecar(
        "oracle",
        Some(&cfg),
        started,
        json!({
            "diverged_fraction": 0.0,
            "points": series.len(),
            "outputs": [csv.file_name().map(|s| s.to_string_lossy())],
        }),
    )?;
    println!("wrote {} ({} points)", csv.display(), series.len());
    Ok(EXIT_OK)
}

fn compare(a: &CompareArgs) -> crate::Result<i32> {
    let started = Instant::now();
    if !(a.threshold.is_finite() && a.threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be > 0, got {}", a.threshold)));
    }
    let sa = read_series(&a.series_a)?;
    let sb = read_series(&a.series_b)?;
    let obs = Observable::from(a.observable);
    let cmp = compare_series(&sa, &sb, obs)?;
    let pass = cmp.max_deviation <= a.threshold;
    let out = Outputs::new(&a.output_dir, a.name.as_deref(), "compare")?;
    let report = json!({
        "series_a": a.series_a.display().to_string(),
        "series_b": a.series_b.display().to_string(),
        "observable": format!("{obs:?}"),
        "threshold": a.threshold,
        "max_deviation": cmp.max_deviation,
        "t_at_max": cmp.t_at_max,
        "pass": pass,
    });
    out.sidecar("compare", None, started, report)?;
    println!(
        "max normalized deviation {:.4} at t = {} -> {}",
        cmp.max_deviation,
        cmp.t_at_max,
        if pass { "pass" } else { "FAIL" }
    );
    Ok(if pass { EXIT_OK } else { EXIT_COMPARISON })
}

fn scan_dt(a: &RunArgs) -> crate::Result<i32> {
    let started = Instant::now();
    let cfg = load_config(a)?;
    let base = cfg.run_config()?;
    let out = Outputs::new(&a.output_dir, a.name.as_deref(), "scan")?;
    let scan = divergence_scan(&base, &cfg.scan.dt_list)?;
    let csv = out.write("csv", scan_to_csv(&scan).as_bytes())?;
    out.sidecar(
        "scan-dt",
        Some(&cfg),
        started,
        json!({
            "slope": scan.slope,
            "monotone": scan.is_monotone(),
            "diverged_fraction": scan.points.iter().map(|p| p.diverged_fraction).fold(0.0, f64::max),
            "outputs": [csv.file_name().map(|s| s.to_string_lossy())],
        }),
    )?;
    println!("wrote {} (log-log slope {:.4})", csv.display(), scan.slope);
    Ok(EXIT_OK)
}
