//! Command-line front end: `polylife <price|hedge|simulate|calibrate> --config run.toml`.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 configuration or parse error.

mod commands;
mod observations;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CalibrateFlags, Context};
use run::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 1,
        }
    }
}

impl From<polylife::Error> for CliError {
    fn from(e: polylife::Error) -> Self {
        use polylife::Error as E;
        match e {
            E::Parse(_)
            | E::Config(_)
            | E::Io(_)
            | E::InvalidSpec(_)
            | E::DegreeViolation(_)
            | E::DimensionMismatch { .. }
            | E::InvalidArgument(_) => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "polylife", version, about = "Pricing, hedging, simulation and calibration of life-insurance liabilities")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price the configured building blocks at each maturity.
    Price,
    /// Simulate the risk-minimizing hedge of a pure endowment portfolio.
    Hedge,
    /// Simulate state paths.
    Simulate {
        /// Write every path to paths.csv.
        #[arg(long)]
        dump: bool,
    },
    /// Fit the model to observations.
    Calibrate {
        /// Monte Carlo replications for the RMSE series (e.g. 100).
        #[arg(long)]
        rmse: Option<usize>,
        /// Benchmark-inverse values are in basis points.
        #[arg(long)]
        bps: bool,
        /// Observations CSV, overriding the config.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config_path = cli.config.as_deref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let config = RunConfig::load(config_path)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let cx = Context { config: &config, base, out: &cli.out, seed: cli.seed.or(config.seed).unwrap_or(0) };
    log::info!("seed {}", cx.seed);
    match &cli.command {
        Command::Price => commands::cmd_price(&cx),
        Command::Hedge => commands::cmd_hedge(&cx),
        Command::Simulate { dump } => commands::cmd_simulate(&cx, *dump),
        Command::Calibrate { rmse, bps, data } => {
            commands::cmd_calibrate(&cx, &CalibrateFlags { rmse: *rmse, bps: *bps, data: data.clone() })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polylife: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
