use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod inspect;
mod run;

use config::{Environment, RunArgs};

/// Runs tool-middleware agents over knowledge bases and SQLite databases.
#[derive(Debug, Parser)]
#[command(name = "middleware", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every task in a task file and write traces plus a report.
    Run(Box<RunArgs>),
    /// Print a trace file as Thought/Act/Observation text.
    Inspect {
        trace: PathBuf,
        /// Show only this step.
        #[arg(long)]
        step: Option<usize>,
    },
    /// Print the tool documentation embedded in prompts.
    Tools {
        #[arg(value_enum)]
        environment: Environment,
    },
    /// Write the bundled triples, database and task files into a directory.
    Fixtures { dir: PathBuf },
}

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Transport(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Transport(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Transport(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run::cmd_run(*args),
        Command::Inspect { trace, step } => inspect::cmd_inspect(&trace, step),
        Command::Tools { environment } => {
            print!("{}", environment.tool_docs());
            Ok(())
        }
        Command::Fixtures { dir } => middleware_core::fixtures::write_fixtures(&dir)
            .map(|paths| {
                for p in paths {
                    println!("{}", p.display());
                }
            })
            .map_err(|e| CliError::Io(format!("cannot write fixtures to {}: {e}", dir.display()))),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
