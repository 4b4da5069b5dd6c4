use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use covsim::error::CliError;
use covsim::simulate::{simulate, SimulateOptions};
use covsim::{audit, plan, report};

#[derive(Parser)]
#[command(name = "covsim", version, about = "Census coverage measurement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replications of an experiment config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Coverage-error table from an audit CSV, or DSEs from a cell-table CSV.
    Audit {
        /// Input CSV.
        #[arg(long = "config", value_name = "CSV")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recommend a coverage-survey sample size and allocation.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a simulate output directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            replications,
            out,
            parallelism,
        } => {
            let outcome = simulate(&SimulateOptions {
                config,
                seed,
                replications,
                out,
                parallelism,
            })?;
            println!(
                "{} replications written to {}",
                outcome.summaries.len(),
                outcome.out_dir.display()
            );
            print!("{}", report::report(&outcome.out_dir)?);
        }
        Command::Audit { input, out } => {
            print!("{}", audit::audit(&input, out.as_deref())?.text);
        }
        Command::Plan { config, out } => {
            let outcome = plan::plan(&config, out.as_deref())?;
            print!("{}", outcome.text);
            if !outcome.plan.is_feasible() {
                let bad: Vec<String> = outcome
                    .plan
                    .groups
                    .iter()
                    .filter(|g| !g.feasible)
                    .map(|g| g.group.to_string())
                    .collect();
                return Err(CliError::Infeasible(format!("CV target missed for {}", bad.join(", "))));
            }
        }
        Command::Report { out } => print!("{}", report::report(&out)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("covsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
