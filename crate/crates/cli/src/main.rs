//! `mqa`: run, score and sample multimodal extraction experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 fatal
//! backend error.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use mqa_core::ErrorKind;

use args::{Cli, Command};

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::BackendFatal => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Eval(a) => commands::eval(a),
        Command::Robustness(a) => commands::robustness(a),
        Command::Sample(a) => commands::sample(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
