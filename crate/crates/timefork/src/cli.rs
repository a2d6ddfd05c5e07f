//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
//! error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use timefork_core::markov::{evaluate, TimingDistribution, TimingModel, DEFAULT_TRUNCATION};
use timefork_core::sim::SimConfig;
use timefork_core::strategy::StrategyKind;

use crate::config::{self, apply, load_config};
use crate::io::{load_headers_file, write_atomic, HeaderFormat};
use crate::report;
use crate::runner;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "timefork", about = "Timestamp-manipulation mining experiments and forensics", disable_version_flag = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo run of one (strategy, alpha) point.
    Simulate(SimulateArgs),
    /// Analytic Markov sweep over an alpha grid.
    Markov(MarkovArgs),
    /// Scan block headers for mod-9 timestamp avoidance.
    Analyze(AnalyzeArgs),
    /// Joint simulated and analytic sweep.
    Compare(CompareArgs),
    /// Print version and schema identifiers.
    Version,
}

/// Flags named after `SimConfig` fields.
#[derive(Args, Debug, Default)]
struct ConfigFlags {
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    mean_block_time: Option<String>,
    #[arg(long, visible_alias = "blocks")]
    n_blocks: Option<String>,
    #[arg(long, visible_alias = "trials")]
    n_trials: Option<String>,
    #[arg(long)]
    timing: Option<String>,
    #[arg(long)]
    genesis_difficulty: Option<String>,
    #[arg(long)]
    fee_rate_lambda: Option<String>,
    #[arg(long)]
    include_uncle_rewards: Option<String>,
    #[arg(long)]
    tie_break: Option<String>,
}

impl ConfigFlags {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let all = [
            ("alpha", &self.alpha),
            ("strategy", &self.strategy),
            ("mean_block_time", &self.mean_block_time),
            ("n_blocks", &self.n_blocks),
            ("n_trials", &self.n_trials),
            ("timing", &self.timing),
            ("genesis_difficulty", &self.genesis_difficulty),
            ("fee_rate_lambda", &self.fee_rate_lambda),
            ("include_uncle_rewards", &self.include_uncle_rewards),
            ("tie_break", &self.tie_break),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_deref().map(|v| (k, v))).collect()
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: ConfigFlags,
    #[arg(long, required_unless_present = "config")]
    seed: Option<u64>,
    /// AggregateReport JSON destination.
    #[arg(long)]
    out: PathBuf,
    /// Optional one-row CSV destination.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MarkovArgs {
    /// Strategy name or `all`.
    #[arg(long, default_value = "all")]
    strategy: String,
    #[arg(long, default_value = "0:0.5:0.05")]
    alpha_grid: String,
    #[arg(long, default_value = "continuous")]
    timing: String,
    #[arg(long, default_value_t = 13.0)]
    mean_block_time: f64,
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    truncate: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// `csv` or `jsonl`; inferred from the extension when absent.
    #[arg(long)]
    format: Option<String>,
    #[arg(long, default_value_t = 10)]
    top_pools: usize,
    #[arg(long)]
    out: PathBuf,
    /// Optional per-pool `miner,dt,count` CSV.
    #[arg(long)]
    histogram_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long, default_value = "0:0.5:0.05")]
    alpha_grid: String,
    /// Comma-separated strategy names or `all`.
    #[arg(long, default_value = "all")]
    strategies: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: ConfigFlags,
    #[arg(long, required_unless_present = "config")]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
    truncate: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            EXIT_DATA
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Markov(a) => markov(a),
        Command::Analyze(a) => analyze(a),
        Command::Compare(a) => compare(a),
        Command::Version => {
            println!("timefork {}", env!("CARGO_PKG_VERSION"));
            println!("schemas: {} {}", report::REPORT_SCHEMA, report::VERDICTS_SCHEMA);
            Ok(())
        }
    }
}

fn build_config(path: Option<&Path>, flags: &ConfigFlags, seed: Option<u64>) -> Result<SimConfig> {
    let mut cfg = match path {
        Some(p) => load_config(p).map_err(data)?,
        None => SimConfig::default(),
    };
    for (k, v) in flags.pairs() {
        apply(&mut cfg, k, v).map_err(usage)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = build_config(a.config.as_deref(), &a.flags, a.seed)?;
    cfg.validate().map_err(usage)?;
    if !cfg.metrics_valid() {
        eprintln!("warning: fewer than 1000 blocks per trial; metrics are noisy");
    }
    let rep = runner::run_experiment(&cfg);
    write(&a.out, &report::report_json(&rep))?;
    if let Some(p) = a.csv {
        write(&p, &report::sim_csv(std::slice::from_ref(&rep)))?;
    }
    Ok(())
}

fn strategies(s: &str) -> Result<Vec<StrategyKind>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(StrategyKind::ALL.to_vec());
    }
    s.split(',')
        .map(|n| StrategyKind::parse(n.trim()).ok_or_else(|| usage(format!("unknown strategy `{n}`"))))
        .collect()
}

fn timing(name: &str) -> Result<TimingDistribution> {
    TimingDistribution::parse(name).ok_or_else(|| usage(format!("unknown timing model `{name}`")))
}

fn markov(a: MarkovArgs) -> Result<()> {
    let grid = config::parse_grid(&a.alpha_grid).map_err(usage)?;
    let tm = TimingModel { mean_block_time: a.mean_block_time, distribution: timing(&a.timing)? };
    let mut points = Vec::new();
    for s in strategies(&a.strategy)? {
        for &alpha in &grid {
            points.push(evaluate(s, alpha, &tm, a.truncate).map_err(usage)?);
        }
    }
    write(&a.out, &report::markov_csv(&points))
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    if a.top_pools == 0 {
        return Err(usage("--top-pools must be at least 1"));
    }
    let format = match a.format.as_deref() {
        Some(f) => Some(HeaderFormat::parse(f).ok_or_else(|| usage(format!("unknown format `{f}`")))?),
        None => None,
    };
    let records = load_headers_file(&a.input, format).map_err(|e| data(format!("{}: {e}", a.input.display())))?;
    let verdicts = timefork_core::forensics::detect(&records, a.top_pools);
    write(&a.out, &report::verdicts_json(&verdicts, a.top_pools, records.len()))?;
    if let Some(p) = a.histogram_out {
        let pools = timefork_core::forensics::pool_rank(&records, a.top_pools);
        write(&p, &report::histogram_csv(&records, &pools))?;
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let base = build_config(a.config.as_deref(), &a.flags, a.seed)?;
    let grid = config::parse_grid(&a.alpha_grid).map_err(usage)?;
    let mut cfgs = Vec::new();
    for s in strategies(&a.strategies)? {
        for &alpha in &grid {
            let cfg = SimConfig { strategy: s, alpha, ..base.clone() };
            cfg.validate().map_err(usage)?;
            cfgs.push(cfg);
        }
    }
    let reports = runner::run_many(&cfgs);
    let rows: Vec<_> = reports
        .into_iter()
        .map(|r| {
            let tm = TimingModel { mean_block_time: r.config.mean_block_time, distribution: r.config.timing };
            let p = evaluate(r.config.strategy, r.config.alpha, &tm, a.truncate).ok();
            (r, p)
        })
        .collect();
    write(&a.out, &report::compare_csv(&rows))
}
