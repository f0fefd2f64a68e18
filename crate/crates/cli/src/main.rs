mod commands;
mod error;
mod manifest;
mod render;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{bench, eval, generate, report, train};
use error::{CliError, CliResult, EXIT_USAGE};
use settings::Common;

/// Denoising autoencoder training and anomaly-detection evaluation.
#[derive(Parser, Debug)]
#[command(name = "d3r", version)]
struct Cli {
    /// TOML file with default settings; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset in MVTec AD layout
    Generate(generate::GenerateArgs),
    /// Train one method on one category
    Train(train::TrainArgs),
    /// Score a trained checkpoint on a category's test split
    Eval(eval::EvalArgs),
    /// Train and evaluate every category and method
    Bench(bench::BenchArgs),
    /// Aggregate existing reports into tables and ROC plots
    Report(report::ReportArgs),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Generate(a) => &a.common,
            Command::Train(a) => &a.common,
            Command::Eval(a) => &a.common,
            Command::Bench(a) => &a.common,
            Command::Report(a) => &a.common,
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let c = cli.command.common().resolve(cli.config.as_deref())?;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Generate(a) => generate::run(a, &c),
        Command::Train(a) => train::run(a, &c),
        Command::Eval(a) => eval::run(a, &c),
        Command::Bench(a) => bench::run(a, &c),
        Command::Report(a) => report::run(a, &c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
