//! Command-line front end for the Cauchy proximal splitting solvers.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

use std::time::Instant;

use clap::{CommandFactory, FromArgMatches};
use serde_json::{json, Value};

use crate::cli::{Cli, Command};
use crate::error::{exit, CliResult};

fn parse(argv: &[String]) -> Result<Cli, clap::Error> {
    let mut cmd = Cli::command().args_override_self(true);
    let names: Vec<String> = cmd
        .get_subcommands()
        .map(|s| s.get_name().to_string())
        .collect();
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    let matches = cmd.try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches)
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let start = Instant::now();
    let (mut report, path, failure) = match &cli.command {
        Command::Superres(a) => (commands::superres(a)?, a.common.report.clone(), None),
        Command::Despeckle(a) => (commands::despeckle_cmd(a)?, a.common.report.clone(), None),
        Command::Form(a) => (commands::form(a)?, a.common.report.clone(), None),
        Command::Wake(a) => (commands::wake(a)?, a.common.report.clone(), None),
        Command::Bench(a) => (commands::bench(a)?, a.report.clone(), None),
        Command::ProxCheck(a) => {
            let (report, failure) = commands::prox_check_cmd(a)?;
            (report, a.report.clone(), failure)
        }
    };
    if let Value::Object(m) = &mut report {
        m.insert("wall_ms".into(), json!(start.elapsed().as_secs_f64() * 1e3));
    }
    // prox-check prints its summary line; the JSON goes only to --report
    if !matches!(cli.command, Command::ProxCheck(_)) || path.is_some() {
        report::emit(&report, path.as_deref())?;
    }
    failure.map_or(Ok(()), Err)
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run(argv: &[String]) -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let argv = match config::expand_args(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match parse(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
