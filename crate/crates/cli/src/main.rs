use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use cfo_cli::commands::{bench, tune, Overrides};
use cfo_cli::theory::{run_suite, Suite};
use cfo_cli::{CliError, ExperimentConfig};

/// Cost-frugal hyperparameter search.
#[derive(Debug, Parser)]
#[command(name = "cfo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a builtin synthetic objective for every seed.
    Bench(RunArgs),
    /// Tune an external evaluator speaking the JSON-lines protocol.
    Tune {
        #[command(flatten)]
        run: RunArgs,
        /// Shell command that starts the evaluator.
        #[arg(long, value_name = "CMD")]
        evaluator: String,
        /// Per-evaluation timeout; a slower reply fails the evaluation.
        #[arg(long, value_name = "S")]
        eval_timeout_secs: Option<f64>,
    },
    /// Run a theory-check suite.
    Theory {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        seeds: SeedArgs,
    },
}

#[derive(Debug, Args)]
struct SeedArgs {
    #[arg(long, value_name = "N", conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seeds.
    #[arg(long, value_name = "CSV", value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

impl SeedArgs {
    fn get(&self) -> Option<Vec<u64>> {
        self.seed.map(|s| vec![s]).or_else(|| self.seeds.clone())
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[command(flatten)]
    seeds: SeedArgs,
    #[arg(long, value_name = "N")]
    max_evals: Option<u64>,
    #[arg(long, value_name = "X")]
    max_cost: Option<f64>,
    #[arg(long, value_name = "S")]
    time_limit_secs: Option<f64>,
    /// Directory for logs and curves.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        Overrides {
            seeds: self.seeds.get(),
            max_evals: self.max_evals,
            max_cost: self.max_cost,
            time_limit_secs: self.time_limit_secs,
        }
        .apply(&mut cfg)?;
        Ok(cfg)
    }
}

fn execute(cli: Cli, console: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Bench(args) => {
            let cfg = args.load()?;
            bench(&cfg, &args.out, console)?;
        }
        Command::Tune { run, evaluator, eval_timeout_secs } => {
            let timeout = match eval_timeout_secs {
                Some(s) if s > 0.0 && s.is_finite() => Some(Duration::from_secs_f64(s)),
                Some(s) => return Err(CliError::Usage(format!("--eval-timeout-secs must be positive, got {s}"))),
                None => None,
            };
            let cfg = run.load()?;
            tune(&cfg, &evaluator, timeout, &run.out, console)?;
        }
        Command::Theory { suite, seeds } => {
            let seeds = seeds.get().unwrap_or_else(|| (0..20).collect());
            let report = run_suite(suite, &seeds)?;
            for line in &report.lines {
                writeln!(console, "{line}")?;
            }
            if !report.passed {
                return Err(CliError::Assertion(format!("{suite:?} suite had failing checks")));
            }
            writeln!(console, "all hard checks passed")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut console = stdout.lock();
    match execute(cli, &mut console) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = console.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
