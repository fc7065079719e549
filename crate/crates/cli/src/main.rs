mod args;
mod commands;
mod flagfile;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};
use baitscore::Exec;

fn run(cli: &Cli) -> Result<()> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let args = serde_json::to_value(&cli.command)?;
    eprintln!(
        "{}",
        serde_json::json!({ "command": cli.command.name(), "seed": cli.seed, "args": args })
    );
    if let Some(p) = &cli.save_config {
        std::fs::write(p, flagfile::render(cli.seed, &args))?;
    }
    match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Train(a) => commands::train(a, cli.seed, exec),
        Command::Predict(a) => commands::predict(a, exec),
        Command::Selftrain(a) => commands::selftrain(a, cli.seed, exec),
        Command::Evaluate(a) => commands::evaluate(a, cli.quiet),
        Command::Baseline(a) => commands::baseline(a, cli.seed, exec),
        Command::AnalyzeMedia(a) => commands::analyze_media(a),
    }
}

fn main() -> ExitCode {
    let argv = match flagfile::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(e.downcast_ref::<baitscore::Error>(), Some(baitscore::Error::Config(_)));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
