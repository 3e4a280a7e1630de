//! `freenc`: command-line access to every computation of the library.
//!
//! Exit status is 0 on success, 2 for invalid input or violated
//! preconditions, 3 for numeric failures. Errors are a single line on stderr:
//!
//! ```text
//! error kind=<kind> exit=<code> [bound=<achieved bound>] message="<text>"
//! ```

mod commands;
mod config;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser};
use serde_json::json;

use commands::Command;
use freenc::Error;

#[derive(Debug, Parser)]
#[command(name = "freenc", version, about = "Free noncommutative functions at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn error_line(kind: &str, code: u8, bound: Option<f64>, msg: &str) -> String {
    let msg = msg.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    match bound {
        Some(b) => format!("error kind={kind} exit={code} bound={} message=\"{msg}\"", config::machine(b)),
        None => format!("error kind={kind} exit={code} message=\"{msg}\""),
    }
}

fn fail(e: &Error) -> ExitCode {
    let code = if e.is_numeric() { 3 } else { 2 };
    eprintln!("{}", error_line(e.kind(), code, e.achieved_bound(), &e.to_string()));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv = match config::merge_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let matches = match Cli::command().args_override_self(true).try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("usage error");
            eprintln!("{}", error_line("usage", 2, None, first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_line("usage", 2, None, &e.to_string()));
            return ExitCode::from(2);
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let root = Cli::command();
    let resolved = config::resolved(root.find_subcommand(name).expect("parsed subcommand exists"), sub);

    let outcome = match cli.command.run() {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let common = cli.command.common();
    let mut human_to_stderr = false;
    if let Some(artifact) = &outcome.artifact {
        match &common.out {
            Some(path) => {
                if let Err(e) = config::write_atomic(path, artifact) {
                    return fail(&e);
                }
            }
            None => {
                print!("{artifact}");
                human_to_stderr = true;
            }
        }
    }
    for line in &outcome.human {
        if human_to_stderr {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }
    if let Some(path) = &common.summary {
        let doc = json!({
            "schema": 1,
            "command": name,
            "version": env!("CARGO_PKG_VERSION"),
            "config": resolved,
            "result": outcome.result,
        });
        let text = serde_json::to_string_pretty(&doc).expect("summary serializes") + "\n";
        if let Err(e) = config::write_atomic(path, &text) {
            return fail(&e);
        }
    }
    ExitCode::SUCCESS
}
