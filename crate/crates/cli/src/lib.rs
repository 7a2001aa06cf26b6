//! Command-line pipeline: `synth`, `extract`, `train`, `eval`.
//!
//! Exit codes: 0 on success, 1 on internal failure, 2 on bad usage or a
//! violated precondition such as too few speakers or an empty split.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;

pub use commands::{cmd_eval, cmd_extract, cmd_synth, cmd_train};
pub use error::CliError;

use args::Command;

/// Runs an already-parsed command.
pub fn dispatch(command: &Command) -> Result<(), CliError> {
    log::info!("resolved {} config: {:?}", command.name(), command);
    match command {
        Command::Synth(a) => cmd_synth(a).map(drop),
        Command::Extract(a) => cmd_extract(a).map(drop),
        Command::Train(a) => cmd_train(a).map(drop),
        Command::Eval(a) => cmd_eval(a).map(drop),
    }
}

/// Parses `raw` (program name first), runs it and returns the exit code.
pub fn run(raw: Vec<OsString>) -> i32 {
    let cli = match config::parse_args(raw) {
        Ok(cli) => cli,
        Err(config::ParseFailure::Clap(e)) => {
            let _ = e.print();
            return e.exit_code();
        }
        Err(config::ParseFailure::Config(e)) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
