//! The `ncb` command-line tool and HTTP API.

pub mod api;
pub mod args;
pub mod commands;
pub mod error;
pub mod files;
pub mod q1;
pub mod workspace;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::error::{CliError, ErrorClass};

/// Runs one invocation and returns its exit code. Failures are written to
/// `err` as a JSON payload.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                let _ = write!(out, "{}", e.render());
                return 0;
            }
            _ => {
                let _ = write!(err, "{}", e.render());
                let e = CliError::validation(e.kind());
                let _ = writeln!(err, "{}", e.to_json());
                return ErrorClass::Validation.exit_code();
            }
        },
    };
    match commands::dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json());
            e.class.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
