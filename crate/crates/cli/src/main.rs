use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hmflow_cli::{cmd_check, cmd_run, cmd_sweep, exit, CliError, RunConfigFile};
use hmflow_core::Execution;

#[derive(Debug, Parser)]
#[command(
    name = "hmflow",
    version,
    about = "Weighted harmonic map heat flow laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Disable data parallelism.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the curvature hypotheses and print the report.
    Check(Common),
    /// Run the flow and write series, final state and verdict.
    Run(Common),
    /// Run a one- or two-parameter sweep.
    Sweep(Common),
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let (common, which) = match &cli.command {
        Command::Check(c) => (c, 0),
        Command::Run(c) => (c, 1),
        Command::Sweep(c) => (c, 2),
    };
    let cfg = RunConfigFile::load(&common.config)?;
    let exec = if common.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    match which {
        0 => {
            let (report, code) = cmd_check(&cfg)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?
            );
            Ok(code)
        }
        1 => {
            let (outcome, code) = cmd_run(&cfg, exec)?;
            eprintln!(
                "{:?} after {} steps at t = {}; artifacts in {}",
                outcome.verdict,
                outcome.steps,
                outcome.final_state.time,
                cfg.artifact_dir().display()
            );
            if let Some(r) = &outcome.rigidity {
                eprintln!("limit: {:?}", r.classification);
            }
            Ok(code)
        }
        _ => {
            let (rows, code) = cmd_sweep(&cfg, exec)?;
            eprintln!(
                "{} runs; summary in {}",
                rows.len(),
                cfg.artifact_dir().join("sweep_summary.csv").display()
            );
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::OK
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match execute(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("hmflow: {e:#}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
