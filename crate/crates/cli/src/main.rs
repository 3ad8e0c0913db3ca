use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use cghz_core::report::{cmd_run, cmd_sweep, RunConfig, Sweep};
use cghz_core::Error;
use clap::{Args, Parser, Subcommand};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;

/// Simulate C-GHZ state preparation with weak cross-Kerr entanglers.
#[derive(Parser)]
#[command(name = "cghz", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preparation scheme (or the dephasing analysis) over seeded shots.
    Run(Common),
    /// Sweep discrimination error and required probe amplitude over m or alpha.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Grid, e.g. `m=2..10`, `m=3,5` or `alpha=1e3,1e4`.
        #[arg(long = "over", value_name = "GRID")]
        over: String,
    },
}

#[derive(Args)]
struct Common {
    /// key=value file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// 1, 2, entangler-only or analysis.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    m: Option<String>,
    /// Probe amplitude; defaults to the smallest one meeting --target-err.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Total Kerr phase of one block's ladder (radians).
    #[arg(long)]
    theta_budget: Option<String>,
    /// Shots for `run`, Monte Carlo samples per row for `sweep`.
    #[arg(long)]
    shots: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Forced window per block, comma separated (one value applies to all).
    #[arg(long)]
    force_window: Option<String>,
    /// json or csv.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    target_err: Option<String>,
    /// Phase-flip probabilities for the analysis, comma separated.
    #[arg(long)]
    p_grid: Option<String>,
    /// Include per-shot records.
    #[arg(long)]
    verbose: bool,
    /// Include wall-clock time in the report (breaks byte-identical output).
    #[arg(long)]
    timing: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Core(Error),
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl Common {
    fn build_config(&self) -> Result<RunConfig, Failure> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            config.apply_file_contents(&text)?;
        }
        let flags = [
            ("scheme", &self.scheme),
            ("k", &self.k),
            ("m", &self.m),
            ("alpha", &self.alpha),
            ("theta_budget", &self.theta_budget),
            ("shots", &self.shots),
            ("seed", &self.seed),
            ("forced_windows", &self.force_window),
            ("output_format", &self.format),
            ("target_err", &self.target_err),
            ("p_grid", &self.p_grid),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        config.verbose |= self.verbose;
        config.timing |= self.timing;
        Ok(config)
    }

    fn emit(&self, text: &str) -> anyhow::Result<()> {
        let text = if text.ends_with('\n') { text.to_string() } else { format!("{text}\n") };
        match &self.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => std::io::stdout().write_all(text.as_bytes()).context("writing to stdout"),
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (common, report) = match &cli.command {
        Command::Run(common) => {
            let config = common.build_config()?;
            (common, cmd_run(&config)?)
        }
        Command::Sweep { common, over } => {
            let config = common.build_config()?;
            let sweep: Sweep = over.parse()?;
            (common, cmd_sweep(&config, &sweep)?)
        }
    };
    common.emit(&report.render()?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Precondition(_) => EXIT_PRECONDITION,
                Error::InvalidArgument(_) | Error::Shape(_) | Error::Size(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            })
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
