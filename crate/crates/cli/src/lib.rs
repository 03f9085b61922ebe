//! Command-line front-end: file formats, field export and the
//! benchmark/validation harness around `modalstat`.

pub mod args;
pub mod binary;
pub mod commands;
pub mod error;
pub mod field;
pub mod model_file;
pub mod signal;

pub use error::{CliError, CliResult};

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with(args: Vec<OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let args = match args::expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            writeln!(err, "error: {e}").ok();
            return e.exit_code();
        }
    };
    let cli = match args::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                write!(out, "{text}").ok();
            } else {
                write!(err, "{text}").ok();
            }
            return code;
        }
    };
    match commands::run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            writeln!(err, "error: {e}").ok();
            e.exit_code()
        }
    }
}
