//! `demandwave` batch command line.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use config::RunConfig;
use failure::Failure;

#[derive(Parser)]
#[command(name = "demandwave", version, about = "Space-time demand tensors, wavelet shrinkage and lead-time forecast evaluation")]
struct Cli {
    /// Flat `key = value` settings file; command-line pairs and flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads, 0 = all cores.
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic population: contracts, ground-truth tensors, rider labels.
    Simulate(Pairs),
    /// Bin a contract CSV into a tensor.
    Bin(Pairs),
    /// Threshold a tensor in the wavelet domain and reconstruct it.
    Denoise(Pairs),
    /// Error tables for budget levels at each forecast period.
    Evaluate(Pairs),
    /// Mean forecast error over start period and lead.
    Surface(Pairs),
    /// Inequality, movement and spectral summaries of a contract CSV.
    Explore(Pairs),
}

#[derive(clap::Args)]
struct Pairs {
    /// Setting overrides.
    #[arg(value_name = "KEY=VALUE")]
    pairs: Vec<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Simulate(_) => "simulate",
            Self::Bin(_) => "bin",
            Self::Denoise(_) => "denoise",
            Self::Evaluate(_) => "evaluate",
            Self::Surface(_) => "surface",
            Self::Explore(_) => "explore",
        }
    }

    fn pairs(&self) -> &[String] {
        match self {
            Self::Simulate(p) | Self::Bin(p) | Self::Denoise(p) | Self::Evaluate(p) | Self::Surface(p) | Self::Explore(p) => &p.pairs,
        }
    }
}

fn cli_command() -> clap::Command {
    let mut cmd = Cli::command();
    for name in ["simulate", "bin", "denoise", "evaluate", "surface", "explore"] {
        cmd = cmd.mut_subcommand(name, |sub| sub.after_help(format!("Settings:\n{}", config::describe(name))));
    }
    cmd
}

fn run(cli: Cli) -> Result<Vec<String>, Failure> {
    let name = cli.command.name();
    let flags = [
        ("seed", cli.seed.map(|s| s.to_string())),
        ("threads", cli.threads.map(|t| t.to_string())),
        ("out", cli.out.map(|p| p.display().to_string())),
    ];
    let cfg = RunConfig::resolve(name, cli.config.as_deref(), cli.command.pairs(), &flags)?;
    let threads: usize = cfg.get("threads")?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::config(format!("threads: {e}")))?;
    }
    match cli.command {
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::Bin(_) => commands::bin(&cfg),
        Command::Denoise(_) => commands::denoise_cmd(&cfg),
        Command::Evaluate(_) => commands::evaluate(&cfg),
        Command::Surface(_) => commands::surface(&cfg),
        Command::Explore(_) => commands::explore(&cfg),
    }
}

fn main() -> ExitCode {
    let matches = cli_command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {f}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
