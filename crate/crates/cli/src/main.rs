use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ntpt::Error;

mod commands;
mod run_dir;
mod selftest;

#[derive(Parser)]
#[command(name = "ntpt", version, about = "Train, inspect and evaluate differentiable interpreter programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more restarts and write a run directory.
    Train(commands::TrainArgs),
    /// Print the discrete programs of a finished run.
    Extract(commands::ExtractArgs),
    /// Score a finished run, per expression length for Math.
    Eval(commands::EvalArgs),
    /// Quick offline consistency checks.
    Selftest,
    /// Neural library files.
    Library {
        #[command(subcommand)]
        command: LibraryCommand,
    },
    /// Print a configuration preset as TOML.
    Config(commands::ConfigArgs),
}

#[derive(Subcommand)]
enum LibraryCommand {
    /// List the functions stored in a library file.
    Inspect { file: PathBuf },
}

/// 2: bad usage or configuration, 3: data or file problems, 4: numeric or
/// evaluation failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Library(_)
        | Error::Domain(_)
        | Error::Compile { .. }
        | Error::LiftOutOfRange { .. }
        | Error::Listing(_) => 2,
        Error::Io { .. } | Error::LibraryFile { .. } | Error::Idx { .. } => 3,
        Error::Numeric(_) | Error::Engine(_) | Error::Marginal(_) | Error::Eval(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Extract(a) => commands::extract(a),
        Command::Eval(a) => commands::eval(a),
        Command::Selftest => selftest::run(),
        Command::Library { command: LibraryCommand::Inspect { file } } => commands::inspect_library(&file),
        Command::Config(a) => commands::config(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
