use std::process::ExitCode;

use clap::Parser;
use mflq_cli::{dispatch, error_line, exit_code, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.checks_passed {
                ExitCode::SUCCESS
            } else {
                eprintln!(r#"{{"error":"checks","exit_code":1,"message":"built-in checks failed"}}"#);
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("{}", error_line(&err));
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
