// Negated comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Run;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

/// Gaussian posterior experiments for linear inverse problems.
#[derive(Debug, Parser)]
#[command(name = "posterior-lab", version)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for grid evaluation. Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Run the built-in check of the subcommand instead of a configured experiment.
    #[arg(long, global = true)]
    self_test: bool,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Posterior mean, covariance diagonal and the dual-formula check.
    Posterior {
        /// Observation coefficients, one per line; synthesized when absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Exact contraction along a prior scaling schedule, with a log-log fit.
    Rates,
    /// Weighted norms of the inverse precision over a lambda grid.
    Bounds,
    /// Sampled checks of the operator norm equivalences.
    Diagnostics,
    /// Theoretical contraction exponent against the truth regularity.
    FigureRates,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Posterior { .. } => "posterior",
            Command::Rates => "rates",
            Command::Bounds => "bounds",
            Command::Diagnostics => "diagnostics",
            Command::FigureRates => "figure-rates",
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(k) = cli.workers {
        if k == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {k} workers: {e}")))?;
    }

    if cli.self_test {
        let lines = commands::self_test(cli.command.name())?;
        let mut failed = 0;
        for (line, pass) in &lines {
            println!("{} {line}", if *pass { "PASS" } else { "FAIL" });
            failed += usize::from(!pass);
        }
        if failed > 0 {
            return Err(CliError::Tolerance(format!("{failed} self-test check(s) failed")));
        }
        return Ok(());
    }

    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config is required (or use --self-test)".into()))?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let cfg = RunConfig::from_toml(&text, &path)?;
    let out_dir = cli.out.unwrap_or_else(|| cfg.output.dir.clone());
    let run = Run::new(cfg, &text, cli.seed);
    let mut out = OutputDir::create(&out_dir)?;
    log::info!("{} -> {}", cli.command.name(), out.path().display());
    match &cli.command {
        Command::Posterior { data } => commands::posterior(&run, data.as_deref(), &mut out),
        Command::Rates => commands::rates(&run, &mut out),
        Command::Bounds => commands::bounds(&run, &mut out),
        Command::Diagnostics => commands::diagnostics(&run, &mut out),
        Command::FigureRates => commands::figure_rates(&run, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
