use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fleetsim_core::controllers::ControllerKind;

use fleetsim_cli::{cmd_compare, cmd_run, cmd_sweep, cmd_validate};

#[derive(Parser)]
#[command(
    name = "fleetsim",
    about = "Deterministic multi-cluster autoscaling simulator and comparison harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one controller on a scenario and write its trace and summary.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// ai | reactive
        #[arg(long)]
        controller: ControllerKind,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run both controllers on the identical scenario and seed and emit the
    /// comparison table.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run compare once per seed and aggregate.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated list, e.g. 1,2,3
        #[arg(long, value_parser = parse_seeds)]
        seeds: Seeds,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Load and validate a scenario, reporting every violation.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let seeds: Result<Vec<u64>, _> = s
        .split(',')
        .map(|part| part.trim().parse::<u64>())
        .collect();
    match seeds {
        Ok(v) if !v.is_empty() => Ok(Seeds(v)),
        Ok(_) => Err("at least one seed is required".to_string()),
        Err(e) => Err(format!("invalid seed list {s:?}: {e}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            controller,
            out,
        } => cmd_run(&scenario, controller, &out),
        Command::Compare { scenario, out } => cmd_compare(&scenario, &out),
        Command::Sweep {
            scenario,
            seeds,
            out,
        } => cmd_sweep(&scenario, &seeds.0, &out),
        Command::Validate { scenario } => cmd_validate(&scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
