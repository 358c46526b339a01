use std::path::PathBuf;
use std::process::ExitCode;

use bode_limits::cli::{dispatch, init_threads, Command, Overrides};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Analyze,
    Simulate,
    Verify,
    Report,
}

/// Analytic Bode-like limits of feedback loops and their Monte-Carlo checks.
#[derive(Debug, Parser)]
#[command(name = "bode-limits", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { 2 } else { 0 };
            return ExitCode::from(code);
        }
    };
    let command = match args.command {
        Cmd::Analyze => Command::Analyze,
        Cmd::Simulate => Command::Simulate,
        Cmd::Verify => Command::Verify,
        Cmd::Report => Command::Report,
    };
    let ov = Overrides {
        out: args.out,
        seed: args.seed,
        trials: args.trials,
    };
    let result = init_threads().and_then(|_| dispatch(command, &args.config, &ov));
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("bode-limits: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
