//! Command-line front end: argument parsing, config-file merging, the
//! individual subcommands and the CSV they emit.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use agejam_core::verify::{self, Level};
use agejam_core::{
    average_reward, find_threshold_breakpoints, optimal_threshold, simulate_aggregate,
    simulate_full, to_chain, validate_params, AttackPolicy, DomainError, Method, Metric,
    SearchConfig, SearchError, SimConfig, SimError, SystemParams, TrajectoryStats,
};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

pub mod csv;

use crate::csv::CsvRow;

#[derive(Debug, Parser)]
#[command(name = "agejam", version, about = "Optimal jamming policies against AoI/AoII status updating")]
pub struct Cli {
    /// Plain-text `key=value` file; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal threshold and its closed-form performance.
    Solve(SolveArgs),
    /// Closed-form performance of an explicit threshold.
    Eval(EvalArgs),
    /// Lambda sweep over one or more policies, written as CSV.
    Sweep(SweepArgs),
    /// Monte Carlo run of a single policy.
    Simulate(SimulateArgs),
    /// Self-check against the built-in oracles.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    #[arg(long, value_parser = parse_metric)]
    pub metric: Metric,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub q: f64,
    #[arg(long)]
    pub r: f64,
}

impl SystemArgs {
    fn params(&self, lambda: f64) -> Result<SystemParams, DomainError> {
        validate_params(self.p, self.q, self.r, lambda)
    }
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Alg1,
    Breakpoints,
    Scan,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Alg1 => Method::Alg1,
            MethodArg::Breakpoints => Method::Breakpoints,
            MethodArg::Scan => Method::Scan,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value = "breakpoints")]
    pub method: MethodArg,
    /// Step size for `--method alg1` (default: slope-scaled).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iters: usize,
    /// Upper end of `--method scan`.
    #[arg(long, default_value_t = 300)]
    pub n_cap: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum SweepPolicy {
    Optimal,
    Opposite,
    Random,
}

impl SweepPolicy {
    fn as_str(self) -> &'static str {
        match self {
            SweepPolicy::Optimal => "optimal",
            SweepPolicy::Opposite => "opposite",
            SweepPolicy::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub slots: u64,
    #[arg(long, default_value_t = 10_000)]
    pub burn_in: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub lambda_start: f64,
    #[arg(long)]
    pub lambda_end: f64,
    #[arg(long)]
    pub lambda_step: f64,
    /// Comma-separated subset of optimal, random, opposite.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "optimal,random,opposite")]
    pub policy: Vec<SweepPolicy>,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimPolicy {
    /// Threshold at `--n`, or the optimal threshold when `--n` is omitted.
    Threshold,
    Optimal,
    Random,
    Opposite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Aggregate,
    Full,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value = "optimal")]
    pub policy: SimPolicy,
    #[arg(long)]
    pub n: Option<u64>,
    /// Attack probability of the random policy.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, value_enum, default_value = "full")]
    pub engine: Engine,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "fast", value_parser = parse_level)]
    pub level: Level,
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse()
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("config file {path}: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error("verification failed: {0}")]
    Verify(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    /// 1 verification failure, 2 invalid input, 3 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Search(SearchError::NoConvergence { .. }) => 3,
            _ => 2,
        }
    }
}

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.to_owned(),
        msg: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config {
                path: path.to_owned(),
                msg: format!("line {}: expected key=value", lineno + 1),
            });
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        out.push((key, value.trim().to_owned()));
    }
    Ok(out)
}

/// Splices config-file entries into `argv` as flags of the chosen
/// subcommand, skipping keys the subcommand lacks or that are already given.
pub fn merge_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(argv);
    };
    let path = match argv[pos].split_once('=') {
        Some((_, p)) => PathBuf::from(p),
        None => match argv.get(pos + 1) {
            Some(p) => PathBuf::from(p),
            None => return Ok(argv),
        },
    };
    let entries = parse_config(&path)?;

    let cmd = Cli::command();
    let Some((sub_idx, sub)) = argv
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| cmd.find_subcommand(a).map(|s| (i, s)))
    else {
        return Ok(argv);
    };
    let known: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_owned))
        .collect();
    let given = |key: &str| {
        let flag = format!("--{key}");
        argv.iter()
            .any(|a| a == &flag || a.starts_with(&format!("{flag}=")))
    };

    let mut extra = Vec::new();
    for (key, value) in entries {
        if key == "config" || !known.contains(&key) || given(&key) {
            continue;
        }
        extra.push(format!("--{key}={value}"));
    }
    let mut merged = argv;
    merged.splice(sub_idx + 1..sub_idx + 1, extra);
    Ok(merged)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => cmd_solve(&args, out),
        Command::Eval(args) => cmd_eval(&args, out),
        Command::Sweep(args) => cmd_sweep(&args, out),
        Command::Simulate(args) => cmd_simulate(&args, out),
        Command::Verify(args) => cmd_verify(args.level, out),
    }
}

pub const SOLVE_HEADER: &str = "metric,p,q,r,lambda,method,n_star,avg_age,avg_active,reward";

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let params = args.system.params(args.lambda)?;
    let chain = to_chain(&params, args.system.metric);
    let mut config = SearchConfig::for_chain(&chain).with_max_iters(args.max_iters);
    if let Some(alpha) = args.alpha {
        config = config.with_alpha(alpha);
    }
    config.n_cap = args.n_cap;
    let n = optimal_threshold(&chain, args.lambda, args.method.into(), &config)?;
    let eval = average_reward(&chain, n, args.lambda);
    let method = match args.method {
        MethodArg::Alg1 => "alg1",
        MethodArg::Breakpoints => "breakpoints",
        MethodArg::Scan => "scan",
    };
    let mut row = CsvRow::new();
    row.push(args.system.metric)
        .num(params.p)
        .num(params.q)
        .num(params.r)
        .num(args.lambda)
        .push(method)
        .push(n)
        .num(eval.avg_age)
        .num(eval.avg_active)
        .num(eval.reward);
    writeln!(out, "{SOLVE_HEADER}")?;
    writeln!(out, "{row}")?;
    Ok(())
}

pub const EVAL_HEADER: &str = "metric,p,q,r,lambda,n,avg_age,avg_active,reward";

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let params = args.system.params(args.lambda)?;
    let chain = to_chain(&params, args.system.metric);
    let eval = average_reward(&chain, args.n, args.lambda);
    let mut row = CsvRow::new();
    row.push(args.system.metric)
        .num(params.p)
        .num(params.q)
        .num(params.r)
        .num(args.lambda)
        .push(args.n)
        .num(eval.avg_age)
        .num(eval.avg_active)
        .num(eval.reward);
    writeln!(out, "{EVAL_HEADER}")?;
    writeln!(out, "{row}")?;
    Ok(())
}

pub const SWEEP_HEADER: &str =
    "metric,p,q,r,lambda,policy,n_star,avg_age,avg_active,avg_reward,se_reward,seed,slots";

/// `start, start + step, ..., <= end`.
pub fn lambda_values(start: f64, end: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Sweep(format!("lambda-step must be positive, got {step}")));
    }
    if start.is_nan() || end.is_nan() || start > end {
        return Err(CliError::Sweep(format!(
            "lambda-start {start} exceeds lambda-end {end}"
        )));
    }
    let count = ((end - start) / step + 1e-9).floor() as u64 + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

/// One computed sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub policy: SweepPolicy,
    pub n_star: Option<u64>,
    pub avg_age: f64,
    pub avg_active: f64,
    pub avg_reward: f64,
    /// Present for simulated rows.
    pub sim: Option<TrajectoryStats>,
}

/// Computes every `(lambda, policy)` row, sorted by lambda then policy name.
///
/// Optimal rows are closed-form. Random and opposite rows are simulated on
/// the aggregate chain, each on its own generator stream (its row index).
pub fn sweep_rows(args: &SweepArgs) -> Result<Vec<SweepRow>, CliError> {
    let lambdas = lambda_values(args.lambda_start, args.lambda_end, args.lambda_step)?;
    let mut policies = args.policy.clone();
    policies.sort();
    policies.dedup();
    if policies.is_empty() {
        return Err(CliError::Sweep("no policies selected".into()));
    }
    let metric = args.system.metric;
    let mut jobs = Vec::new();
    for &lambda in &lambdas {
        let params = args.system.params(lambda)?;
        for &policy in &policies {
            jobs.push((params, policy));
        }
    }
    let sim = SimConfig::new(args.sim.slots, args.sim.burn_in, args.sim.seed);

    jobs.par_iter()
        .enumerate()
        .map(|(idx, &(params, policy))| -> Result<SweepRow, CliError> {
            let chain = to_chain(&params, metric);
            let n_star = find_threshold_breakpoints(&chain, params.lambda)?;
            let simulate = |attack| simulate_aggregate(&params, metric, attack, &sim.with_stream(idx as u64));
            let row = match policy {
                SweepPolicy::Optimal => {
                    let eval = average_reward(&chain, n_star, params.lambda);
                    SweepRow {
                        lambda: params.lambda,
                        policy,
                        n_star: Some(n_star),
                        avg_age: eval.avg_age,
                        avg_active: eval.avg_active,
                        avg_reward: eval.reward,
                        sim: None,
                    }
                }
                SweepPolicy::Random | SweepPolicy::Opposite => {
                    let (attack, shown) = if policy == SweepPolicy::Random {
                        (AttackPolicy::UniformRandom(0.5), None)
                    } else {
                        (AttackPolicy::OppositeThreshold(n_star), Some(n_star))
                    };
                    let st = simulate(attack)?;
                    SweepRow {
                        lambda: params.lambda,
                        policy,
                        n_star: shown,
                        avg_age: st.mean_state,
                        avg_active: st.mean_active,
                        avg_reward: st.mean_reward,
                        sim: Some(st),
                    }
                }
            };
            Ok(row)
        })
        .collect()
}

fn sweep_csv(args: &SweepArgs, rows: &[SweepRow]) -> String {
    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    for row in rows {
        let mut line = CsvRow::new();
        line.push(args.system.metric)
            .num(args.system.p)
            .num(args.system.q)
            .num(args.system.r)
            .num(row.lambda)
            .push(row.policy.as_str())
            .opt(row.n_star)
            .num(row.avg_age)
            .num(row.avg_active)
            .num(row.avg_reward);
        match &row.sim {
            Some(st) => line.num(st.se_reward).push(st.seed).push(st.slots),
            None => line.blank().blank().blank(),
        };
        text.push_str(&line.to_string());
        text.push('\n');
    }
    text
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = sweep_rows(args)?;
    let text = sweep_csv(args, &rows);
    match &args.out {
        None => out.write_all(text.as_bytes())?,
        Some(path) => {
            // written next to the target and renamed, so failures leave no partial file
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d.to_owned(),
                _ => PathBuf::from("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(text.as_bytes())?;
            tmp.persist(path).map_err(|e| e.error)?;
        }
    }
    Ok(())
}

pub const SIMULATE_HEADER: &str = "metric,p,q,r,lambda,policy,n,engine,slots,burn_in,seed,mean_state,se_state,mean_active,se_active,mean_reward,se_reward";

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let params = args.system.params(args.lambda)?;
    let metric = args.system.metric;
    let chain = to_chain(&params, metric);
    let threshold = || -> Result<u64, CliError> {
        match args.n {
            Some(n) => Ok(n),
            None => Ok(find_threshold_breakpoints(&chain, args.lambda)?),
        }
    };
    let (policy, name, n) = match args.policy {
        SimPolicy::Threshold | SimPolicy::Optimal => {
            let n = threshold()?;
            (AttackPolicy::Threshold(n), "threshold", Some(n))
        }
        SimPolicy::Opposite => {
            let n = threshold()?;
            (AttackPolicy::OppositeThreshold(n), "opposite", Some(n))
        }
        SimPolicy::Random => (AttackPolicy::UniformRandom(args.rho), "random", None),
    };
    let config = SimConfig::new(args.sim.slots, args.sim.burn_in, args.sim.seed);
    let (engine, st) = match args.engine {
        Engine::Aggregate => ("aggregate", simulate_aggregate(&params, metric, policy, &config)?),
        Engine::Full => ("full", simulate_full(&params, metric, policy, &config)?),
    };
    let mut row = CsvRow::new();
    row.push(metric)
        .num(params.p)
        .num(params.q)
        .num(params.r)
        .num(args.lambda)
        .push(name)
        .opt(n)
        .push(engine)
        .push(st.slots)
        .push(st.burn_in)
        .push(st.seed)
        .num(st.mean_state)
        .num(st.se_state)
        .num(st.mean_active)
        .num(st.se_active)
        .num(st.mean_reward)
        .num(st.se_reward);
    writeln!(out, "{SIMULATE_HEADER}")?;
    writeln!(out, "{row}")?;
    Ok(())
}

pub fn cmd_verify(level: Level, out: &mut dyn Write) -> Result<(), CliError> {
    writeln!(out, "check,status,detail")?;
    let mut first_failure = None;
    for outcome in verify::run(level) {
        let status = if outcome.passed { "pass" } else { "fail" };
        writeln!(out, "{},{status},\"{}\"", outcome.name, outcome.detail.replace('"', "'"))?;
        if !outcome.passed && first_failure.is_none() {
            first_failure = Some(format!("{}: {}", outcome.name, outcome.detail));
        }
    }
    match first_failure {
        Some(msg) => Err(CliError::Verify(msg)),
        None => Ok(()),
    }
}
