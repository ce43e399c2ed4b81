//! `poolformer`: data generation, training, sampling, evaluation and
//! inspection driven by a flat key = value config file.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use poolformer::Error;

use crate::commands::Run;
use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    GenerateData,
    Train,
    Sample,
    Evaluate,
    Gradcheck,
    Inspect,
}

#[derive(Debug, Parser)]
#[command(name = "poolformer", version, about = "Hierarchical pooling sequence models for 8-bit audio")]
struct Cli {
    command: Command,
    /// Flat `section.key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory for checkpoints, logs, samples and reports.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// `key=value` override applied after the config file; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) | Error::Shape { .. } => 2,
        Error::Format { .. } => 3,
        Error::Evaluation(_) | Error::State(_) | Error::Io(_) => 1,
    }
}

fn run(cli: &Cli) -> poolformer::Result<()> {
    let mut cfg = RunConfig::load(&cli.config)?;
    for kv in &cli.set {
        cfg.apply_override(kv)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cli.out)?;
    std::fs::write(cli.out.join("effective.cfg"), cfg.to_text())?;
    let run = Run {
        cfg,
        out: cli.out.clone(),
    };
    match cli.command {
        Command::GenerateData => commands::generate_data(&run),
        Command::Train => commands::train_cmd(&run),
        Command::Sample => commands::sample_cmd(&run),
        Command::Evaluate => commands::evaluate_cmd(&run),
        Command::Gradcheck => commands::gradcheck_cmd(&run),
        Command::Inspect => commands::inspect_cmd(&run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
