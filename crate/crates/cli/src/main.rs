//! `volterra`: fit, select, compare and reproduce from the command line.

mod commands;
mod config;
mod data;
mod error;
mod ingest;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "volterra",
    version,
    about = "Volterra series forecasting of scalar time series",
    propagate_version = true
)]
struct Cli {
    /// KEY=VALUE defaults file; explicit flags win over it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model and report its in-sample reconstruction.
    Fit(CommonArgs),
    /// Cross-validate the hyperparameter grid and refit the winner.
    Select(CommonArgs),
    /// Compare two error samples with the KSPA test.
    Kspa(KspaArgs),
    /// Run the seeded Monte-Carlo method comparison.
    Simulate(CommonArgs),
    /// Rebuild the benchmark tables and figures into a directory.
    Reproduce(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Single-column CSV holding the series.
    #[arg(long, short = 'i', value_name = "FILE")]
    input: Option<PathBuf>,
    /// Window length (number of delayed values).
    #[arg(long, short = 'm')]
    memory: Option<usize>,
    /// Polynomial order.
    #[arg(long, short = 'p')]
    order: Option<usize>,
    /// Ridge weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Kernel: sum, inhomogeneous, exponential or gaussian.
    #[arg(long)]
    kernel: Option<String>,
    /// Gaussian kernel width.
    #[arg(long)]
    sigma: Option<f64>,
    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Fraction of the series given to training.
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Master seed of the simulations.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo runs per cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Length of each simulated series.
    #[arg(long)]
    length: Option<usize>,
    /// Output directory; without it reports go to stdout.
    #[arg(long, short = 'o', value_name = "DIR")]
    out: Option<PathBuf>,
    /// Benchmark target: all, table1..table3 or figure1..figure3.
    #[arg(long)]
    target: Option<String>,
    /// Divide targets by their standard deviation before fitting.
    #[arg(long)]
    prescale: bool,
}

impl CommonArgs {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            input: self.input.clone(),
            memory: self.memory,
            order: self.order,
            lambda: self.lambda,
            kernel: self.kernel.clone(),
            sigma: self.sigma,
            folds: self.folds,
            train_fraction: self.train_fraction,
            seed: self.seed,
            runs: self.runs,
            length: self.length,
            out: self.out.clone(),
            target: self.target.clone(),
            // The flag can only switch prescaling on; absence defers to the
            // configuration file.
            prescale: if self.prescale { Some(true) } else { None },
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct KspaArgs {
    /// First sample of raw signed errors, single-column CSV.
    first: PathBuf,
    /// Second sample of raw signed errors.
    second: PathBuf,
    /// Error transform: abs or sq.
    #[arg(long)]
    transform: Option<String>,
    /// Simultaneous comparisons behind the adjusted p-value.
    #[arg(long)]
    family_size: Option<usize>,
    /// Output directory; without it the report goes to stdout.
    #[arg(long, short = 'o', value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Applies `VOLTERRA_THREADS` to the global worker pool before any parallel
/// work starts.
fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("VOLTERRA_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| {
            CliError::config(format!(
                "VOLTERRA_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot size the thread pool: {e}")))
}

fn run(cli: &Cli) -> CliResult<()> {
    init_threads()?;
    let file_config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Fit(args) => commands::fit::run(&args.to_config().or_from(&file_config)),
        Command::Select(args) => commands::select::run(&args.to_config().or_from(&file_config)),
        Command::Simulate(args) => commands::simulate::run(&args.to_config().or_from(&file_config)),
        Command::Reproduce(args) => {
            commands::reproduce::run(&args.to_config().or_from(&file_config))
        }
        Command::Kspa(args) => {
            let cfg = RunConfig {
                transform: args.transform.clone(),
                family_size: args.family_size,
                out: args.out.clone(),
                ..RunConfig::default()
            }
            .or_from(&file_config);
            commands::kspa::run(&args.first, &args.second, &cfg)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("{err}");
        std::process::exit(err.exit_code());
    }
}
