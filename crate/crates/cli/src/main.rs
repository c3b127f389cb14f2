mod cli;
mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use cli::{Cli, Command};
use commands::Globals;
use error::{CliError, Result};

fn parse(argv: &[OsString]) -> std::result::Result<clap::ArgMatches, ExitCode> {
    Cli::command().try_get_matches_from(argv).map_err(|e| {
        let _ = e.print();
        if e.use_stderr() {
            ExitCode::from(1)
        } else {
            ExitCode::SUCCESS
        }
    })
}

fn run(argv: Vec<OsString>) -> std::result::Result<(), ExitCode> {
    let mut matches = parse(&argv)?;
    if let Some(path) = matches.get_one::<std::path::PathBuf>("config") {
        let extra = config::config_args(path, &Cli::command(), &matches).map_err(fail)?;
        let mut merged = argv;
        merged.extend(extra);
        matches = parse(&merged)?;
    }
    let cli = Cli::from_arg_matches(&matches).map_err(|e| {
        let _ = e.print();
        ExitCode::from(1)
    })?;
    dispatch(cli).map_err(fail)
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(e.exit_code() as u8)
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let globals = Globals { seed: cli.seed };
    match &cli.command {
        Command::Synth(a) => commands::synth(a, &globals),
        Command::Aggregate(a) => commands::aggregate(a),
        Command::Dataset(a) => commands::dataset(a),
        Command::Select(a) => commands::select(a, &globals),
        Command::Train(a) => commands::train(a, &globals),
        Command::Eval(a) => commands::eval(a, &globals),
        Command::Sweep(a) => commands::sweep(a, &globals),
        Command::Ttest(a) => commands::ttest(a),
        Command::Inspect(a) => commands::inspect(a),
    }
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    match std::panic::catch_unwind(|| run(argv)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(code)) => code,
        Err(_) => ExitCode::from(3),
    }
}
