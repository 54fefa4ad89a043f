//! Command-line experiment runner.
//!
//! Exit codes: 0 success, 1 failed built-in checks or I/O error, 2 config
//! parse error or bad usage, 3 model validation failure, 4 solver failure,
//! 5 simulation blow-up. Failures also print one JSON line on stderr with
//! the error category and message.

pub mod args;
pub mod manifest;
pub mod run;
pub mod svg;

use std::path::Path;

use mflq_core::{Error, ErrorCategory};
use serde::Serialize;

pub use args::{Cli, Command, RunArgs};
pub use manifest::{CommandKind, RunManifest, DEFAULT_N_LIST};
pub use run::{execute, Outcome};

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
        _ => match err.category() {
            ErrorCategory::Config | ErrorCategory::Usage => 2,
            ErrorCategory::Validation => 3,
            ErrorCategory::Solver => 4,
            ErrorCategory::Simulation => 5,
        },
    }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    exit_code: i32,
    message: String,
}

/// The machine-readable stderr line for `err`.
pub fn error_line(err: &Error) -> String {
    let category = match err {
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => "io",
        _ => err.category().as_str(),
    };
    serde_json::to_string(&ErrorLine {
        error: category,
        exit_code: exit_code(err),
        message: err.to_string(),
    })
    .expect("error line serializes")
}

/// Parse-free entry point: resolve the manifest for `command` and run it.
pub fn dispatch(command: &Command) -> Result<Outcome, Error> {
    let (kind, args) = match command {
        Command::Riccati(a) => (CommandKind::Riccati, a),
        Command::Stationary(a) => (CommandKind::Stationary, a),
        Command::Simulate(a) => (CommandKind::Simulate, a),
        Command::Sweep(a) => (CommandKind::Sweep, a),
        Command::Nash(a) => (CommandKind::Nash, a),
        Command::ReproduceSec4(a) => (CommandKind::ReproduceSec4, a),
        Command::Rerun { manifest, out } => {
            return execute(&RunManifest::read(manifest)?, out);
        }
    };
    let manifest = RunManifest::from_args(kind, args)?;
    execute(&manifest, Path::new(&args.out))
}
