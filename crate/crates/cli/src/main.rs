//! `cascade` — run, sweep, and label cost-ordered routing cascades.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime
//! error. Every command writes a manifest; identical config hash and
//! seed reproduce byte-identical outcome logs.

mod args;
mod error;
mod fsutil;
mod label;
mod manifest;
mod run;
mod sweep;
mod table2;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    // Die quietly when stdout closes early (`cascade label ... | head`)
    // instead of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Simulate(args) => run::simulate(&args),
        Command::Replay(args) => run::replay(&args),
        Command::Sweep(args) => sweep::run(&args),
        Command::Label(args) => label::run(&args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
