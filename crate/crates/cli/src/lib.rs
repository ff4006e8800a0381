//! Command-line front end: runs, solver comparisons, parameter sweeps,
//! scenario validation and oracle checks, each writing CSV/JSON artifacts
//! plus a plain-text summary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use nild_core::accounting::PeakTracker;
use nild_core::baselines::oracle_solve;
use nild_core::colocation::capacity_snapshot;
use nild_core::scenario::{arrival_vector, feasibility_scan, load_scenario_from_path, parse_scenario_from_path};
use nild_core::simulator::{epoch_rows, run_horizon, RunReport, EPOCH_COLUMNS};
use nild_core::solver::EstimatorContext;
use nild_core::{Error, ScenarioConfig, SolverKind};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const CONSTRAINT: i32 = 3;
}

pub const COMPARE_COLUMNS: [&str; 3] = ["solver", "total_cost", "pct_vs_worst"];
pub const SWEEP_COLUMNS: [&str; 3] = ["param_value", "rep", "total_cost"];
pub const ORACLE_COLUMNS: [&str; 5] = ["epoch", "nild_cost", "oracle_cost", "gap_pct", "nild_converged"];

#[derive(Debug, Parser)]
#[command(name = "nild", version, about = "Geo-distributed data-center workload simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one solver over a horizon.
    Run(RunArgs),
    /// Run several solvers on identical arrivals.
    Compare(CompareArgs),
    /// Repeat runs over a range of one parameter.
    Sweep(SweepArgs),
    /// Check a scenario document and its feasibility at every hour.
    Validate(ValidateArgs),
    /// Compare the game solver with the exhaustive grid oracle epoch by epoch.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Workload noise seed; defaults to the scenario's own.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub days: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "nild")]
    pub solver: SolverKind,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', default_value = "nild,nsld_simplified,greedy_cf,uniform")]
    pub solvers: Vec<SolverKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Beta,
    DataSizeMultiplier,
    Amplitude,
    NetworkPrice,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "nild")]
    pub solver: SolverKind,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Seed of repetition 0; repetition k uses seed_base + k. Defaults to the
    /// scenario's workload seed.
    #[arg(long)]
    pub seed_base: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Grid resolution per player; defaults to the scenario's setting.
    #[arg(long)]
    pub grid_steps: Option<usize>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: exit::INPUT,
            message: message.into(),
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self {
            code: exit::INTERNAL,
            message: e.to_string(),
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Parse(_) | Error::Validation { .. } | Error::MissingTrace(_) | Error::UnknownId { .. } => exit::INPUT,
        Error::InsufficientCapacity { .. }
        | Error::CapacityExceeded { .. }
        | Error::InfeasibleQueue { .. }
        | Error::SizeCap(_) => exit::CONSTRAINT,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => exit::INPUT,
        _ => exit::INTERNAL,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn load(path: &Path) -> CliResult<ScenarioConfig> {
    if !path.is_file() {
        return Err(CliError::input(format!("scenario not found: {}", path.display())));
    }
    Ok(load_scenario_from_path(path)?)
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::internal(format!("cannot create output directory {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(CliError::internal)?;
    w.write_record(header).map_err(CliError::internal)?;
    for r in rows {
        w.serialize(r).map_err(CliError::internal)?;
    }
    w.flush().map_err(CliError::internal)
}

fn check_days(days: usize) -> CliResult<()> {
    if days == 0 {
        return Err(CliError::input("--days must be at least 1"));
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::INPUT } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    match command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}

fn money(x: f64) -> String {
    format!("{x:.2}")
}

/// Plain-text summary of one run.
pub fn run_summary(report: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario     {}", report.scenario);
    let _ = writeln!(s, "fingerprint  {}", report.fingerprint);
    let _ = writeln!(s, "solver       {}", report.solver);
    let _ = writeln!(s, "days         {}", report.days);
    let _ = writeln!(s, "seed         {}", report.seed);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<16} {:>14} {:>12} {:>14} {:>14}",
        "dc", "energy", "peak", "network", "total"
    );
    for t in &report.dc_totals {
        let _ = writeln!(
            s,
            "{:<16} {:>14} {:>12} {:>14} {:>14}",
            t.id,
            money(t.energy_cost),
            money(t.peak_cost),
            money(t.network_cost),
            money(t.total_cost)
        );
    }
    let _ = writeln!(s, "{:<16} {:>57}", "all", money(report.total_cost));
    let _ = writeln!(s);
    let c = &report.convergence;
    let _ = writeln!(
        s,
        "converged epochs  {}/{}",
        c.converged_epochs,
        report.epochs.len()
    );
    let _ = writeln!(s, "iterations        mean {:.1}, max {}", c.mean_iterations, c.max_iterations);
    let _ = writeln!(s, "projections       {}", c.projections_applied);
    let _ = writeln!(
        s,
        "summed delay (h)  mean {:.6}, max {:.6}",
        report.delay.mean_summed_delay, report.delay.max_summed_delay
    );
    s
}

/// Writes report.json, epochs.csv and summary.txt for one run.
pub fn write_run(report: &RunReport, out: &Path) -> CliResult<()> {
    prepare_out(out)?;
    let json = serde_json::to_string_pretty(report).map_err(CliError::internal)?;
    write_file(&out.join("report.json"), &(json + "\n"))?;
    write_csv(&out.join("epochs.csv"), &EPOCH_COLUMNS, &epoch_rows(report))?;
    write_file(&out.join("summary.txt"), &run_summary(report))
}

pub fn cmd_run(a: &RunArgs) -> CliResult<()> {
    check_days(a.common.days)?;
    let s = load(&a.common.scenario)?;
    let seed = a.common.seed.unwrap_or(s.workload.seed);
    let report = run_horizon(&s, a.solver, a.common.days, seed)?;
    write_run(&report, &a.common.out)?;
    print!("{}", run_summary(&report));
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub solver: String,
    pub total_cost: f64,
    pub pct_vs_worst: f64,
}

pub fn cmd_compare(a: &CompareArgs) -> CliResult<()> {
    check_days(a.common.days)?;
    if a.solvers.len() < 2 {
        return Err(CliError::input("compare needs at least two solvers"));
    }
    let s = load(&a.common.scenario)?;
    let seed = a.common.seed.unwrap_or(s.workload.seed);
    let results: Vec<_> = a
        .solvers
        .par_iter()
        .map(|&k| (k, run_horizon(&s, k, a.common.days, seed)))
        .collect();

    let worst = results
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok().map(|r| r.total_cost))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (k, r) in &results {
        match r {
            Ok(r) => rows.push(CompareRow {
                solver: k.to_string(),
                total_cost: r.total_cost,
                pct_vs_worst: if worst != 0.0 {
                    100.0 * (worst - r.total_cost) / worst.abs()
                } else {
                    0.0
                },
            }),
            Err(e) => failures.push((*k, e)),
        }
    }
    prepare_out(&a.common.out)?;
    write_csv(&a.common.out.join("compare.csv"), &COMPARE_COLUMNS, &rows)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "scenario  {}", s.name);
    let _ = writeln!(summary, "days      {}", a.common.days);
    let _ = writeln!(summary, "seed      {seed}");
    let _ = writeln!(summary);
    let _ = writeln!(summary, "{:<16} {:>16} {:>12}", "solver", "total", "vs worst %");
    for r in &rows {
        let _ = writeln!(summary, "{:<16} {:>16} {:>12.3}", r.solver, money(r.total_cost), r.pct_vs_worst);
    }
    for (k, e) in &failures {
        let _ = writeln!(summary, "{:<16} failed: {e}", k.to_string());
    }
    if let Some(nild) = rows.iter().find(|r| r.solver == SolverKind::Nild.name()) {
        let best = rows.iter().all(|r| nild.total_cost <= r.total_cost);
        let _ = writeln!(summary);
        let _ = writeln!(summary, "nild best: {}", if best { "yes" } else { "no" });
    }
    write_file(&a.common.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    match failures.first() {
        Some((k, e)) => Err(CliError {
            code: exit_code(e),
            message: format!("solver {k}: {e}"),
        }),
        None => Ok(()),
    }
}

/// Scenario with one sweep parameter set to `value`.
pub fn apply_param(base: &ScenarioConfig, param: SweepParam, value: f64) -> ScenarioConfig {
    let mut s = base.clone();
    match param {
        SweepParam::Beta => s.solver.beta = value,
        SweepParam::DataSizeMultiplier => s.task_types.iter_mut().for_each(|t| t.data_size *= value),
        SweepParam::Amplitude => s.workload.amplitude = value,
        SweepParam::NetworkPrice => s.solver.network_price = value,
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub rep: usize,
    pub total_cost: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    check_days(a.common.days)?;
    if a.values.is_empty() || a.reps == 0 {
        return Err(CliError::input("sweep needs at least one value and one repetition"));
    }
    let base = load(&a.common.scenario)?;
    let seed_base = a.seed_base.or(a.common.seed).unwrap_or(base.workload.seed);
    let mut scenarios = Vec::with_capacity(a.values.len());
    for &v in &a.values {
        let s = apply_param(&base, a.param, v);
        s.validate().map_err(|e| CliError {
            code: exit_code(&e),
            message: format!("{} = {v}: {e}", param_name(a.param)),
        })?;
        scenarios.push(s);
    }
    let jobs: Vec<(usize, usize)> = (0..a.values.len()).flat_map(|v| (0..a.reps).map(move |r| (v, r))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(v, r)| {
            run_horizon(&scenarios[v], a.solver, a.common.days, seed_base.wrapping_add(r as u64))
                .map(|rep| (v, r, rep.total_cost))
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for (job, res) in jobs.iter().zip(results) {
        match res {
            Ok((v, r, total)) => rows.push(SweepRow {
                param_value: a.values[v],
                rep: r,
                total_cost: total,
            }),
            Err(e) => {
                return Err(CliError {
                    code: exit_code(&e),
                    message: format!("{} = {}: {e}", param_name(a.param), a.values[job.0]),
                })
            }
        }
    }
    prepare_out(&a.common.out)?;
    write_csv(&a.common.out.join("sweep.csv"), &SWEEP_COLUMNS, &rows)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "scenario   {}", base.name);
    let _ = writeln!(summary, "solver     {}", a.solver);
    let _ = writeln!(summary, "parameter  {}", param_name(a.param));
    let _ = writeln!(summary, "reps       {} (seeds {}..)", a.reps, seed_base);
    let _ = writeln!(summary);
    let _ = writeln!(summary, "{:>14} {:>16} {:>14}", "value", "mean total", "stddev");
    for &v in &a.values {
        let xs: Vec<f64> = rows.iter().filter(|r| r.param_value == v).map(|r| r.total_cost).collect();
        let (m, sd) = mean_std(&xs);
        let _ = writeln!(summary, "{v:>14} {:>16} {:>14.4}", money(m), sd);
    }
    write_file(&a.common.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn param_name(p: SweepParam) -> &'static str {
    match p {
        SweepParam::Beta => "beta",
        SweepParam::DataSizeMultiplier => "data_size_multiplier",
        SweepParam::Amplitude => "amplitude",
        SweepParam::NetworkPrice => "network_price",
    }
}

pub fn cmd_validate(a: &ValidateArgs) -> CliResult<()> {
    if !a.scenario.is_file() {
        return Err(CliError::input(format!("scenario not found: {}", a.scenario.display())));
    }
    let s = match parse_scenario_from_path(&a.scenario) {
        Ok(s) => {
            println!("PASS structure");
            s
        }
        Err(e) => {
            println!("FAIL structure: {e}");
            return Err(e.into());
        }
    };
    let violations = feasibility_scan(&s);
    if violations.is_empty() {
        println!("PASS feasibility (24 epochs)");
        return Ok(());
    }
    for v in &violations {
        println!("FAIL feasibility: {v}");
    }
    Err(CliError {
        code: exit::CONSTRAINT,
        message: format!("{} feasibility violation(s); first: {}", violations.len(), violations[0]),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    pub epoch: usize,
    pub nild_cost: f64,
    pub oracle_cost: f64,
    pub gap_pct: f64,
    pub nild_converged: bool,
}

/// Game-solver and oracle estimated cost for every epoch of the horizon;
/// peak state follows the game solver's realized run.
pub fn oracle_rows(s: &ScenarioConfig, days: usize, seed: u64, grid_steps: usize) -> Result<Vec<OracleRow>, Error> {
    let report = run_horizon(s, SolverKind::Nild, days, seed)?;
    let mut scenario = s.clone();
    scenario.workload.seed = seed;
    let mut tracker = PeakTracker::<f64>::for_scenario(&scenario);
    let period = 24 * scenario.billing_period_days as usize;
    let mut rows = Vec::new();
    for e in &report.epochs {
        if e.epoch % period == 0 {
            tracker.reset();
        }
        let snap = capacity_snapshot(&scenario, e.epoch);
        let gar = arrival_vector(&scenario.workload, &scenario.task_types, e.epoch);
        let ctx = EstimatorContext::<f64>::from_scenario(&scenario, &snap, &gar, &tracker)?;
        let nild = ctx.total_cost(&e.allocation.ar)?;
        let (_, oracle) = oracle_solve(&ctx, grid_steps).map_err(|err| err.at_epoch(e.epoch))?;
        rows.push(OracleRow {
            epoch: e.epoch,
            nild_cost: nild,
            oracle_cost: oracle,
            gap_pct: 100.0 * (nild - oracle) / oracle.abs().max(f64::MIN_POSITIVE),
            nild_converged: e.diagnostics.converged,
        });
        for (d, p) in e.power.iter().enumerate() {
            tracker.peak_increase(d, p.grid_draw());
        }
    }
    Ok(rows)
}

pub fn cmd_oracle(a: &OracleArgs) -> CliResult<()> {
    check_days(a.common.days)?;
    let s = load(&a.common.scenario)?;
    let seed = a.common.seed.unwrap_or(s.workload.seed);
    let steps = a.grid_steps.unwrap_or(s.solver.oracle_grid_steps);
    let rows = oracle_rows(&s, a.common.days, seed, steps)?;
    prepare_out(&a.common.out)?;
    write_csv(&a.common.out.join("oracle.csv"), &ORACLE_COLUMNS, &rows)?;
    let worst = rows.iter().map(|r| r.gap_pct).fold(f64::NEG_INFINITY, f64::max);
    let mean = rows.iter().map(|r| r.gap_pct).sum::<f64>() / rows.len() as f64;
    let mut summary = String::new();
    let _ = writeln!(summary, "scenario    {}", s.name);
    let _ = writeln!(summary, "grid steps  {steps}");
    let _ = writeln!(summary, "epochs      {}", rows.len());
    let _ = writeln!(summary, "gap vs oracle (%)  mean {mean:.4}, max {worst:.4}");
    write_file(&a.common.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}
