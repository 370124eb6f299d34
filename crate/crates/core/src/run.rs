//! Scenario orchestration and report files.
//!
//! Each subcommand writes one CSV data file plus a JSON manifest into the
//! output directory. Numbers are written in the shortest representation that
//! round-trips to the same `f64`, so data files are byte-stable for a given
//! configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clt::{self, CltError};
use crate::config::{ConfigError, ScenarioConfig};
use crate::ctmc::{self, CtmcError, EnsembleStats};
use crate::limit::{self, LimitError, LimitSolution};
use crate::model::{self, ModelError, ReciprocityCertificate};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "CONTAGION_THREADS";

/// Tolerance on `|beta_k - b * alpha_k|` when a run needs reciprocity.
pub const RECIPROCITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Limit,
    Analyze,
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Limit => "limit",
            Command::Analyze => "analyze",
            Command::Compare => "compare",
        }
    }

    pub fn data_file(self) -> &'static str {
        match self {
            Command::Simulate => "mc.csv",
            Command::Limit => "limit.csv",
            Command::Analyze => "clt.csv",
            Command::Compare => "compare.csv",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Clt(#[from] CltError),
    #[error(transparent)]
    Ctmc(#[from] CtmcError),
    #[error("{CONTAGION_THREADS} must be a positive integer, got {0:?}", CONTAGION_THREADS = THREADS_ENV)]
    Threads(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl RunError {
    /// Process exit code: 2 config, 3 numerical, 4 reciprocity, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Threads(_) => 2,
            RunError::Model(ModelError::ReciprocityViolated { .. } | ModelError::AllAlphasZero) => 4,
            RunError::Model(_) => 2,
            RunError::Clt(CltError::ReciprocityRequired | CltError::CertificateMismatch) => 4,
            RunError::Clt(_) | RunError::Limit(_) | RunError::Ctmc(_) => 3,
            RunError::Io { .. } | RunError::Csv(_) => 1,
        }
    }
}

/// Record of one run, written next to its data file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: Command,
    /// SHA-256 of the canonical configuration JSON.
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub threads: usize,
    pub outputs: Vec<String>,
}

pub fn config_hash(cfg: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical_json().as_bytes()))
}

/// Worker count from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> Result<Option<usize>, RunError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(RunError::Threads(v)),
        },
    }
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Shortest round-trip decimal form of `x`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), RunError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn indexed(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}_{i}")).collect()
}

fn certificate(cfg: &ScenarioConfig) -> Result<ReciprocityCertificate, RunError> {
    Ok(model::check_reciprocity(
        &cfg.environment,
        RECIPROCITY_TOLERANCE,
    )?)
}

fn solve(cfg: &ScenarioConfig) -> Result<LimitSolution, RunError> {
    Ok(limit::solve_limit(
        &cfg.environment,
        cfg.horizon,
        cfg.grid_size,
        cfg.ode_tolerance,
    )?)
}

fn simulate(cfg: &ScenarioConfig) -> Result<EnsembleStats, RunError> {
    let portfolio = model::build_portfolio(&cfg.environment, cfg.n, cfg.assignment_mode, cfg.seed)?;
    Ok(ctmc::ensemble(
        &portfolio,
        cfg.horizon,
        &cfg.t_grid(),
        cfg.replicas,
        &cfg.thresholds,
        cfg.seed,
    )?)
}

fn variance_column(
    cfg: &ScenarioConfig,
    sol: &LimitSolution,
    cert: &ReciprocityCertificate,
) -> Result<Vec<f64>, RunError> {
    sol.t_grid
        .iter()
        .map(|&t| {
            clt::variance_horizon(sol, &cfg.environment, t, Some(cert))
                .map(|r| r.total)
                .map_err(RunError::from)
        })
        .collect()
}

/// Columns `t, q_1..q_K, m, l, hazard_1..hazard_K`.
pub fn limit_table(cfg: &ScenarioConfig) -> Result<(Vec<String>, Vec<Vec<f64>>), RunError> {
    let sol = solve(cfg)?;
    let k = cfg.environment.len();
    let loss = limit::limit_loss(&sol, &cfg.environment)?;
    let mut header = vec!["t".to_string()];
    header.extend(indexed("q", k));
    header.extend(["m".to_string(), "l".to_string()]);
    header.extend(indexed("hazard", k));
    let rows = (0..sol.t_grid.len())
        .map(|g| {
            let mut row = vec![sol.t_grid[g]];
            row.extend(&sol.q[g]);
            row.extend([sol.m[g], loss[g]]);
            row.extend(&sol.hazard[g]);
            row
        })
        .collect();
    Ok((header, rows))
}

/// Columns `t, mean_frac_1..K, mean_loss, var_scaled_loss, excess_emp_<x>...`.
pub fn simulate_table(cfg: &ScenarioConfig) -> Result<(Vec<String>, Vec<Vec<f64>>), RunError> {
    let stats = simulate(cfg)?;
    let k = cfg.environment.len();
    let mut header = vec!["t".to_string()];
    header.extend(indexed("mean_frac", k));
    header.extend(["mean_loss".to_string(), "var_scaled_loss".to_string()]);
    header.extend(
        cfg.thresholds
            .iter()
            .map(|&x| format!("excess_emp_{}", fmt_f64(x))),
    );
    let rows = (0..stats.t_grid.len())
        .map(|g| {
            let mut row = vec![stats.t_grid[g]];
            row.extend(&stats.mean_class_fractions[g]);
            row.extend([stats.mean_loss_fraction[g], stats.var_scaled_loss[g]]);
            row.extend(stats.excess_prob_empirical.iter().map(|c| c.probability[g]));
            row
        })
        .collect();
    Ok((header, rows))
}

/// Columns `t, l, V, excess_<x>...`.
pub fn analyze_table(cfg: &ScenarioConfig) -> Result<(Vec<String>, Vec<Vec<f64>>), RunError> {
    let cert = certificate(cfg)?;
    let sol = solve(cfg)?;
    let loss = limit::limit_loss(&sol, &cfg.environment)?;
    let variance = variance_column(cfg, &sol, &cert)?;
    let curve = clt::excess_curve(
        &sol,
        &cfg.environment,
        Some(&cert),
        cfg.n,
        &cfg.thresholds,
        &sol.t_grid,
    )?;
    let mut header = vec!["t".to_string(), "l".to_string(), "V".to_string()];
    header.extend(cfg.thresholds.iter().map(|&x| format!("excess_{}", fmt_f64(x))));
    let rows = (0..sol.t_grid.len())
        .map(|g| {
            let mut row = vec![sol.t_grid[g], loss[g], variance[g]];
            row.extend(&curve[g]);
            row
        })
        .collect();
    Ok((header, rows))
}

/// Columns `t, q_k.., emp_frac_k.., abs_gap_k.., l, mean_loss, V, var_scaled_loss_gap`.
///
/// `var_scaled_loss_gap` is the empirical variance of `sqrt(N) (L^N/N - mean)`
/// minus the limit variance `V`.
pub fn compare_table(cfg: &ScenarioConfig) -> Result<(Vec<String>, Vec<Vec<f64>>), RunError> {
    let cert = certificate(cfg)?;
    let sol = solve(cfg)?;
    let loss = limit::limit_loss(&sol, &cfg.environment)?;
    let variance = variance_column(cfg, &sol, &cert)?;
    let stats = simulate(cfg)?;
    let k = cfg.environment.len();

    let mut header = vec!["t".to_string()];
    header.extend(indexed("q", k));
    header.extend(indexed("emp_frac", k));
    header.extend(indexed("abs_gap", k));
    header.extend(
        ["l", "mean_loss", "V", "var_scaled_loss_gap"]
            .iter()
            .map(|s| s.to_string()),
    );
    let rows = (0..sol.t_grid.len())
        .map(|g| {
            let q = &sol.q[g];
            let emp = &stats.mean_class_fractions[g];
            let mut row = vec![sol.t_grid[g]];
            row.extend(q);
            row.extend(emp);
            row.extend(q.iter().zip(emp).map(|(a, b)| (a - b).abs()));
            row.extend([
                loss[g],
                stats.mean_loss_fraction[g],
                variance[g],
                stats.var_scaled_loss[g] - variance[g],
            ]);
            row
        })
        .collect();
    Ok((header, rows))
}

/// Runs `command` in the current rayon pool and writes its files into `out_dir`.
pub fn run(command: Command, cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunManifest, RunError> {
    let started = now_ms();
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let (header, rows) = match command {
        Command::Simulate => simulate_table(cfg)?,
        Command::Limit => limit_table(cfg)?,
        Command::Analyze => analyze_table(cfg)?,
        Command::Compare => compare_table(cfg)?,
    };
    let data = out_dir.join(command.data_file());
    write_csv(&data, &header, &rows)?;

    let manifest_name = format!("manifest_{}.json", command.name());
    let manifest = RunManifest {
        command,
        config_hash: config_hash(cfg),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        threads: rayon::current_num_threads(),
        outputs: vec![command.data_file().to_string(), manifest_name.clone()],
    };
    let path = out_dir.join(manifest_name);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}

/// [`run`] inside a dedicated pool of `threads` workers (all cores when `None`).
pub fn run_with_threads(
    command: Command,
    cfg: &ScenarioConfig,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<RunManifest, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| RunError::Threads(e.to_string()))?;
    pool.install(|| run(command, cfg, out_dir))
}
