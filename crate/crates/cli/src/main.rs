mod infer;
mod study;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ppboot::{Error, ErrorKind};

/// Prediction-powered bootstrap confidence intervals.
#[derive(Debug, Parser)]
#[command(name = "ppboot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute one confidence interval from labeled and unlabeled CSV files.
    Infer(infer::InferArgs),
    /// Run a Monte Carlo coverage study described by a JSON config.
    Study(study::StudyArgs),
}

pub(crate) fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Argument => 2,
        ErrorKind::Data => 3,
        ErrorKind::Estimation => 4,
    }
}

/// Squashes a clap error into a single line.
fn one_line(rendered: &str) -> String {
    rendered
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", one_line(&e.render().to_string()));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Infer(args) => infer::run(args),
        Command::Study(args) => study::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            ExitCode::from(exit_code(&e))
        }
    }
}
