use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use osp_cli::commands::{self, Outcome, RunArgs};
use osp_cli::{exit, CliError};

/// Optimal orientation design for hybrid TOA-RSS-AOA sensor networks.
#[derive(Parser, Debug)]
#[command(name = "osp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn run_args(&self) -> RunArgs {
        RunArgs {
            config: self.config.clone(),
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the optimal orientation matrix.
    Design {
        #[command(flatten)]
        common: Common,
        /// Record wall-clock times in the trace (makes it non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Evaluate the A, D and E criteria of a given orientation.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// CSV file with one unit row per sensor.
        #[arg(long)]
        orientation: PathBuf,
    },
    /// Monte-Carlo MSE of the maximum likelihood estimator.
    Mse {
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustive angle-grid search for small planar problems.
    Bruteforce {
        #[command(flatten)]
        common: Common,
        /// Grid resolution in degrees.
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
        /// Also report the grid discretization slack.
        #[arg(long)]
        slack: bool,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("OSP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("OSP_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Design { common, timing } => {
            let (outcome, result) = commands::design(&common.run_args(), timing)?;
            println!(
                "{} after {} iterations: {:.10e}",
                status_word(outcome),
                result.outer_iterations(),
                result.criterion()
            );
            Ok(outcome)
        }
        Command::Evaluate { common, orientation } => {
            let r = commands::evaluate(&common.run_args(), &orientation)?;
            println!(
                "A = {:.10e}\nD = {:.10e}\nE = {:.10e}",
                r.criteria.a, r.criteria.d, r.criteria.e
            );
            Ok(Outcome::Converged)
        }
        Command::Mse { common } => {
            let r = commands::mse(&common.run_args())?;
            println!(
                "mse = {:.6e} (se {:.2e}, crlb trace {:.6e}, {} trials, {} failed)",
                r.mse,
                r.standard_error,
                r.crlb_trace,
                r.trials,
                r.failed_trials.len()
            );
            Ok(Outcome::Converged)
        }
        Command::Bruteforce {
            common,
            resolution,
            slack,
        } => {
            let r = commands::bruteforce(&common.run_args(), resolution, slack)?;
            println!("{} = {:.10e} at {} deg", r.criterion, r.value, r.resolution_deg);
            if let Some(s) = r.grid_slack {
                println!("grid slack = {s:.3e}");
            }
            Ok(Outcome::Converged)
        }
    }
}

fn status_word(o: Outcome) -> &'static str {
    match o {
        Outcome::Converged => "converged",
        Outcome::MaxIterations => "stopped at the iteration limit",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::INVALID_CONFIG as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
