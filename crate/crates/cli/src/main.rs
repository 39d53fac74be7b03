use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use otto_cli::commands;
use otto_cli::output::json_string;
use otto_cli::{load_config, CliError, Format, Result, RunConfig};
use qutrit_otto::dyson::MIN_GRID;
use qutrit_otto::SignTriple;

/// Environment variable capping worker threads.
const THREADS_VAR: &str = "OTTO_QUTRIT_THREADS";

#[derive(Parser)]
#[command(name = "otto-qutrit", version, about = "Qutrit Unruh-DeWitt detector as a quantum Otto engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Response functions and coherence integrals.
    Response {
        #[command(subcommand)]
        action: ResponseAction,
    },
    /// Closed-form stage shifts against the second-order Dyson oracle.
    Oracle {
        #[command(subcommand)]
        action: OracleAction,
    },
    /// Full Otto cycles.
    Cycle {
        #[command(subcommand)]
        action: CycleAction,
    },
    /// Positive work condition.
    Pwc {
        #[command(subcommand)]
        action: PwcAction,
    },
}

#[derive(Subcommand)]
enum ResponseAction {
    /// Compute the response sets of both stages.
    Compute {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Subcommand)]
enum OracleAction {
    /// Compare randomized draws; exits nonzero if any exceeds tolerance.
    Compare {
        #[arg(long, default_value_t = 20)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Oracle grid intervals.
        #[arg(long, default_value_t = 512)]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Subcommand)]
enum CycleAction {
    /// Run one cycle.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the grid given in the configuration's [sweep] section.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Subcommand)]
enum PwcAction {
    /// PWC report of the configured cycle.
    Evaluate {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Mark the satisfied region of a sign triple on the S-plane.
    Region {
        /// Sign triple such as `+++` or `+-+`.
        #[arg(long = "case")]
        case: SignTriple,
        #[arg(long)]
        theta: f64,
        /// Samples per axis.
        #[arg(long, default_value_t = 41)]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))
}

/// Flags override the configuration's [output] section.
fn resolve(output: &OutputArgs, cfg: Option<&RunConfig>, default: Format) -> (Option<PathBuf>, Format) {
    let settings = cfg.map(|c| c.output.clone()).unwrap_or_default();
    (output.out.clone().or(settings.path), output.format.or(settings.format).unwrap_or(default))
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_config(config: &ConfigArg, output: &OutputArgs, default: Format, f: fn(&RunConfig, Format) -> Result<String>) -> Result<()> {
    let cfg = load_config(&config.config)?;
    let (path, format) = resolve(output, Some(&cfg), default);
    emit(&f(&cfg, format)?, path.as_deref())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Response { action: ResponseAction::Compute { config, output } } => with_config(&config, &output, Format::Json, commands::response_compute),
        Command::Cycle { action: CycleAction::Run { config, output } } => with_config(&config, &output, Format::Json, commands::cycle_run),
        Command::Cycle { action: CycleAction::Sweep { config, output } } => with_config(&config, &output, Format::Csv, commands::cycle_sweep),
        Command::Pwc { action: PwcAction::Evaluate { config, output } } => with_config(&config, &output, Format::Json, commands::pwc_evaluate),
        Command::Pwc { action: PwcAction::Region { case, theta, grid, output } } => {
            let (path, format) = resolve(&output, None, Format::Csv);
            emit(&commands::pwc_region(case, theta, grid, format)?, path.as_deref())
        }
        Command::Oracle { action: OracleAction::Compare { draws, seed, grid, output } } => {
            if grid < MIN_GRID || grid % 2 != 0 {
                return Err(CliError::Usage(format!("--grid must be even and at least {MIN_GRID}, got {grid}")));
            }
            let (path, format) = resolve(&output, None, Format::Csv);
            let result = commands::oracle_compare(draws, seed, grid, format)?;
            emit(&result.text, path.as_deref())?;
            result.check()
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{}", json_string(&e.to_json()));
            ExitCode::FAILURE
        }
    }
}
