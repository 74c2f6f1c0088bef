use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use harq_noma_cli::{run, Command};

#[derive(Parser)]
#[command(name = "harq-noma", version, about = "Outage, power allocation and pairing experiments for HARQ-CC NOMA")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form outage against Monte Carlo.
    Outage(Common),
    /// SCA power allocation with grid and equal-power baselines.
    Power(Common),
    /// Swap-matching user pairing against the exhaustive oracle.
    Pair(Common),
    /// Minimum number of rounds per outage target.
    Rounds(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `system.rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Outage(a) => (Command::Outage, a),
        Cmd::Power(a) => (Command::Power, a),
        Cmd::Pair(a) => (Command::Pair, a),
        Cmd::Rounds(a) => (Command::Rounds, a),
    };
    match execute(command, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command, args: &Common) -> anyhow::Result<()> {
    if args.threads == Some(0) {
        anyhow::bail!("--threads must be >= 1");
    }
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let csv = run(command, &text, args.seed, args.threads)?;
    match &args.out {
        Some(path) => std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}
