//! Command-line front end.
//!
//! Each subcommand is a thin wrapper over a library function in this module
//! ([`generate_instance`], [`run_instance`], [`sweep`], [`verify`]), so every
//! output is reproducible from the API with the same seeds.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formats::{fmt_f64, read_matrix, write_matrix, CsvTable, KeyValues};
use crate::linalg::coherence;
use crate::lrebn::{run_lrebn, LrebnConfig, OmegaRedraw, RecoveryResult, RunSummary};
use crate::synthetic::{
    check_epsilon, CoherenceMode, InstanceParams, NoiseMode, ObservationOracle, ProblemInstance,
};
use crate::verify::{reports_to_csv, run_named, CheckName, CheckReport, Verdict};

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "ADAPTIVE_MC_THREADS";

pub const RESULTS_HEADER: [&str; 8] = [
    "col_index",
    "mode",
    "k_at_time",
    "d_at_time",
    "theta_tilde",
    "residual",
    "threshold",
    "col_error_vs_L",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "m",
    "n",
    "r",
    "epsilon",
    "delta",
    "k_final",
    "observations",
    "max_col_error",
    "mean_col_error",
    "bound_violations",
];

pub const SWEEP_HEADER: [&str; 16] = [
    "cell",
    "trial",
    "seed",
    "m",
    "n",
    "r",
    "epsilon",
    "delta",
    "mu_upper",
    "observations",
    "k_final",
    "max_col_error",
    "mean_col_error",
    "theta_tilde_final",
    "fully_observed",
    "bound_violations",
];

#[derive(Debug, Parser)]
#[command(name = "adaptive-mc", version, about = "Adaptive low-rank matrix completion under bounded noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic instance directory (L.mat, M.mat, meta).
    Generate(GenerateArgs),
    /// Run the estimator on an instance directory.
    Run(RunArgs),
    /// Generate and solve a grid of instances; one CSV row per trial.
    Sweep(SweepArgs),
    /// Run the verification checks; one CSV row per check.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_positive)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_parser = parse_positive)]
    pub r: usize,
    #[arg(long, value_parser = parse_epsilon)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// `sphere` or `scaled-gaussian`.
    #[arg(long, default_value = "sphere")]
    pub noise_mode: NoiseMode,
    /// `incoherent` or `spiked:<index>:<weight>`.
    #[arg(long, default_value = "incoherent")]
    pub coherence_mode: CoherenceMode,
}

/// Estimator flags shared by `run` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct AlgorithmArgs {
    /// Substitute `max(1, 2·μ(Û)·k/r)` for the coherence bound after each
    /// accepted column (heuristic).
    #[arg(long)]
    pub estimate_mu: bool,
    #[arg(long)]
    pub no_angle_cap: bool,
    /// Let the budget exceed m; samples are still capped at m rows.
    #[arg(long)]
    pub no_budget_cap: bool,
    #[arg(long, default_value = "on-update")]
    pub omega_redraw: OmegaRedraw,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Instance directory written by `generate`.
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_delta)]
    pub delta: f64,
    /// Coherence bound; defaults to the coherence recorded in `meta`.
    #[arg(long)]
    pub mu_upper: Option<f64>,
    /// Estimator seed; defaults to the instance seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub algorithm: AlgorithmArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_positive)]
    pub m: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_positive)]
    pub r: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_epsilon)]
    pub epsilon: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_delta)]
    pub delta: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "sphere")]
    pub noise_mode: NoiseMode,
    #[arg(long, default_value = "incoherent")]
    pub coherence_mode: CoherenceMode,
    /// Fixed coherence bound; defaults to each instance's true coherence.
    #[arg(long)]
    pub mu_upper: Option<f64>,
    #[command(flatten)]
    pub algorithm: AlgorithmArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Comma-separated check names, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub names: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path; the table is always printed to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_epsilon(s: &str) -> std::result::Result<f64, String> {
    let eps: f64 = s.parse().map_err(|e| format!("{e}"))?;
    check_epsilon(eps).map_err(|e| e.to_string())?;
    Ok(eps)
}

fn parse_delta(s: &str) -> std::result::Result<f64, String> {
    let delta: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(delta > 0.0 && delta < 0.1) {
        return Err(format!("delta must satisfy 0 < delta < 0.1, got {delta}"));
    }
    Ok(delta)
}

fn parse_positive(s: &str) -> std::result::Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v == 0 {
        return Err("value must be at least 1".to_string());
    }
    Ok(v)
}

/// Files of an instance directory.
pub fn instance_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (dir.join("L.mat"), dir.join("M.mat"), dir.join("meta"))
}

/// Writes `L.mat`, `M.mat` and `meta` under `out`; returns the coherence of
/// the true column space.
pub fn generate_instance(params: &InstanceParams, seed: u64, out: &Path) -> Result<f64> {
    let instance = ProblemInstance::generate(params, seed)?;
    let mu = coherence(&instance.true_basis)?;
    let (l_path, m_path, meta_path) = instance_paths(out);
    write_matrix(&l_path, &instance.l)?;
    write_matrix(&m_path, &instance.m)?;
    let mut meta = KeyValues::new();
    meta.push("m", params.m)
        .push("n", params.n)
        .push("r", params.r)
        .push("epsilon", params.epsilon)
        .push("seed", seed)
        .push("mode", params.noise)
        .push("coherence_mode", params.coherence)
        .push("coherence", mu);
    meta.write(&meta_path)?;
    Ok(mu)
}

/// Everything `run` writes.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub result: RecoveryResult,
    pub summary: RunSummary,
    pub config: LrebnConfig,
    pub results_csv: CsvTable,
    pub summary_csv: CsvTable,
    pub manifest: KeyValues,
}

/// Builds the estimator configuration from shared flags.
pub fn algorithm_config(
    epsilon: f64,
    delta: f64,
    r: usize,
    mu_upper: f64,
    seed: u64,
    args: &AlgorithmArgs,
) -> Result<LrebnConfig> {
    let mut cfg = LrebnConfig::new(epsilon, delta, r, mu_upper).with_seed(seed);
    cfg.estimate_mu = args.estimate_mu;
    cfg.angle_cap_enabled = !args.no_angle_cap;
    cfg.budget_cap_to_m = !args.no_budget_cap;
    cfg.omega_redraw = args.omega_redraw;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the estimator on an instance directory without writing anything.
pub fn run_instance(
    dir: &Path,
    delta: f64,
    mu_upper: Option<f64>,
    seed: Option<u64>,
    args: &AlgorithmArgs,
) -> Result<RunOutputs> {
    let (l_path, m_path, meta_path) = instance_paths(dir);
    let meta = KeyValues::read(&meta_path)?;
    let m: usize = meta.parse("m", &meta_path)?;
    let n: usize = meta.parse("n", &meta_path)?;
    let r: usize = meta.parse("r", &meta_path)?;
    let epsilon: f64 = meta.parse("epsilon", &meta_path)?;
    let seed = match seed {
        Some(s) => s,
        None => meta.parse("seed", &meta_path)?,
    };
    let mu_upper = match mu_upper {
        Some(mu) => mu,
        None => meta.parse("coherence", &meta_path)?,
    };
    let observed = read_matrix(&m_path)?;
    let clean = read_matrix(&l_path)?;
    for (path, mat) in [(&m_path, &observed), (&l_path, &clean)] {
        if mat.nrows() != m || mat.ncols() != n {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!(
                    "matrix is {}x{} but meta declares {m}x{n}",
                    mat.nrows(),
                    mat.ncols()
                ),
            });
        }
    }
    let cfg = algorithm_config(epsilon, delta, r, mu_upper, seed, args)?;
    let oracle = ObservationOracle::new(&observed);
    let result = run_lrebn(&oracle, &cfg)?;
    let summary = RunSummary::evaluate(&result, &clean, epsilon)?;

    let mut results_csv = CsvTable::new(&RESULTS_HEADER);
    for c in &result.columns {
        results_csv.push(vec![
            c.col_index.to_string(),
            c.mode.to_string(),
            c.k_at_time.to_string(),
            c.d_at_time.to_string(),
            fmt_f64(c.theta_tilde.radians()),
            fmt_f64(c.residual),
            fmt_f64(c.threshold),
            fmt_f64(summary.column_errors[c.col_index]),
        ])?;
    }
    let mut summary_csv = CsvTable::new(&SUMMARY_HEADER);
    summary_csv.push(vec![
        m.to_string(),
        n.to_string(),
        r.to_string(),
        fmt_f64(epsilon),
        fmt_f64(delta),
        result.k_final.to_string(),
        result.observations.to_string(),
        fmt_f64(summary.max_col_error),
        fmt_f64(summary.mean_col_error),
        summary.bound_violations().to_string(),
    ])?;
    let manifest = manifest(&cfg);
    Ok(RunOutputs {
        result,
        summary,
        config: cfg,
        results_csv,
        summary_csv,
        manifest,
    })
}

pub fn manifest(cfg: &LrebnConfig) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.push("epsilon", cfg.epsilon)
        .push("delta", cfg.delta)
        .push("r", cfg.r)
        .push("mu_upper", cfg.mu_upper)
        .push("estimate_mu", cfg.estimate_mu)
        .push("seed", cfg.seed)
        .push("budget_cap_to_m", cfg.budget_cap_to_m)
        .push("angle_cap_enabled", cfg.angle_cap_enabled)
        .push("omega_redraw_policy", cfg.omega_redraw);
    kv
}

/// Writes `results.csv`, `summary.csv` and `manifest` under `out`.
pub fn write_run_outputs(outputs: &RunOutputs, out: &Path) -> Result<()> {
    outputs.results_csv.write(&out.join("results.csv"))?;
    outputs.summary_csv.write(&out.join("summary.csv"))?;
    outputs.manifest.write(&out.join("manifest"))
}

/// Grid for [`sweep`].
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub r: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub delta: Vec<f64>,
    pub coherence: CoherenceMode,
    pub noise: NoiseMode,
    pub mu_upper: Option<f64>,
}

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub epsilon: f64,
    pub delta: f64,
}

impl SweepGrid {
    /// Cells in row-major order over `(epsilon, delta, r, m, n)`.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for &epsilon in &self.epsilon {
            for &delta in &self.delta {
                for &r in &self.r {
                    for &m in &self.m {
                        for &n in &self.n {
                            cells.push(SweepCell { m, n, r, epsilon, delta });
                        }
                    }
                }
            }
        }
        cells
    }
}

/// Seed of trial `t` in cell `c`.
pub fn sweep_seed(seed: u64, cell: usize, trials: u64, trial: u64) -> u64 {
    seed.wrapping_add((cell as u64).wrapping_mul(trials))
        .wrapping_add(trial)
}

/// Runs every `(cell, trial)`; a trial with seed `s` generates its instance
/// and runs the estimator with seed `s`, matching `generate` then `run`.
pub fn sweep(grid: &SweepGrid, trials: u64, seed: u64, args: &AlgorithmArgs) -> Result<CsvTable> {
    let cells = grid.cells();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t)))
        .collect();
    let rows: Vec<Vec<String>> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let cell = cells[c];
            let s = sweep_seed(seed, c, trials, t);
            let params = InstanceParams {
                m: cell.m,
                n: cell.n,
                r: cell.r,
                epsilon: cell.epsilon,
                coherence: grid.coherence,
                noise: grid.noise,
            };
            let instance = ProblemInstance::generate(&params, s)?;
            let mu = match grid.mu_upper {
                Some(mu) => mu,
                None => coherence(&instance.true_basis)?,
            };
            let cfg = algorithm_config(cell.epsilon, cell.delta, cell.r, mu, s, args)?;
            let oracle = ObservationOracle::new(&instance.m);
            let result = run_lrebn(&oracle, &cfg)?;
            let summary = RunSummary::evaluate(&result, &instance.l, cell.epsilon)?;
            Ok(vec![
                c.to_string(),
                t.to_string(),
                s.to_string(),
                cell.m.to_string(),
                cell.n.to_string(),
                cell.r.to_string(),
                fmt_f64(cell.epsilon),
                fmt_f64(cell.delta),
                fmt_f64(mu),
                result.observations.to_string(),
                result.k_final.to_string(),
                fmt_f64(summary.max_col_error),
                fmt_f64(summary.mean_col_error),
                fmt_f64(result.theta_tilde_final.radians()),
                result.fully_observed().to_string(),
                summary.bound_violations().to_string(),
            ])
        })
        .collect::<Result<_>>()?;
    let mut table = CsvTable::new(&SWEEP_HEADER);
    for row in rows {
        table.push(row)?;
    }
    Ok(table)
}

/// Runs the named checks with their default parameters.
pub fn verify(names: &[String], trials: u64, seed: u64) -> Result<Vec<CheckReport>> {
    CheckName::parse_list(names)?
        .into_iter()
        .map(|name| run_named(name, trials, seed))
        .collect()
}

/// `true` iff no report failed; N/A and vacuous verdicts do not fail.
pub fn verify_passed(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.verdict != Verdict::Fail)
}

/// Sizes the global thread pool from [`THREADS_ENV`] when set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::invalid(format!("cannot configure thread pool: {e}")))
}

/// Executes a parsed command; returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    configure_threads()?;
    match cli.command {
        Command::Generate(a) => {
            let params = InstanceParams {
                m: a.m,
                n: a.n,
                r: a.r,
                epsilon: a.epsilon,
                coherence: a.coherence_mode,
                noise: a.noise_mode,
            };
            let mu = generate_instance(&params, a.seed, &a.out)?;
            println!("coherence={mu}");
            Ok(0)
        }
        Command::Run(a) => {
            let outputs = run_instance(&a.instance, a.delta, a.mu_upper, a.seed, &a.algorithm)?;
            write_run_outputs(&outputs, &a.out)?;
            print!("{}", outputs.summary_csv.to_csv());
            Ok(0)
        }
        Command::Sweep(a) => {
            let grid = SweepGrid {
                m: a.m,
                n: a.n,
                r: a.r,
                epsilon: a.epsilon,
                delta: a.delta,
                coherence: a.coherence_mode,
                noise: a.noise_mode,
                mu_upper: a.mu_upper,
            };
            let table = sweep(&grid, a.trials, a.seed, &a.algorithm)?;
            table.write(&a.out)?;
            println!("{} rows written to {}", table.len(), a.out.display());
            Ok(0)
        }
        Command::Verify(a) => {
            let reports = verify(&a.names, a.trials, a.seed)?;
            let table = reports_to_csv(&reports)?;
            if let Some(out) = &a.out {
                table.write(out)?;
            }
            print!("{}", table.to_csv());
            Ok(if verify_passed(&reports) { 0 } else { 1 })
        }
    }
}
