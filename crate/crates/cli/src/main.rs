//! `hyperbary` command-line front end.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 when a checked bound
//! fails (the witness goes to `<out>_report.json`).

mod args;
mod run;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::{merge_config, Cli};
use run::{execute, Failure, Outputs};

fn input_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let argv = match merge_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => return input_error(e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.command.common().threads {
        if n == 0 {
            return input_error("--threads: must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return input_error(format!("--threads: {e}"));
        }
    }
    let mut out = Outputs::new(&cli.command);
    match execute(&cli.command, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => input_error(msg),
        Err(Failure::Violation { what, witness }) => {
            eprintln!("violation: {what}");
            if let Err(Failure::Input(msg) | Failure::Violation { what: msg, .. }) =
                out.report(json!({ "violation": what, "witness": witness }))
            {
                eprintln!("error: {msg}");
            }
            ExitCode::from(2)
        }
    }
}
