use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use splitlab_core::harness::{run_command, Command, ScenarioConfig};
use splitlab_core::Error;

#[derive(Parser)]
#[command(name = "splitlab", version, about = "Marketplace experiment simulator and study runner")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one assignment and write outcomes, assignment and estimate.
    Simulate(Common),
    /// Monte Carlo bias of each study design against the ground truth.
    BiasStudy(Common),
    /// Rejection rates over the effect-size grid.
    PowerCurve(Common),
    /// Exact expectations by enumerating every assignment.
    OracleCheck(Common),
    /// Stable-system check over restricted marketplaces.
    ValidateAssumptions(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (.toml, .json, or a manifest.csv from an earlier run).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "splitlab-out")]
    out: PathBuf,
    /// Replications, overrides `study.reps`.
    #[arg(long)]
    reps: Option<usize>,
    /// Lift the enumeration size guard.
    #[arg(long)]
    force: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Validation(_) | Error::EnumerationTooLarge { .. } => 2,
        _ => 1,
    }
}

fn run(command: Command, args: &Common) -> Result<String, Error> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.study.reps = reps;
    }
    cfg.study.force |= args.force;
    cfg.validate()?;
    run_command(command, &cfg, &args.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let (command, args) = match &cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::BiasStudy(a) => (Command::BiasStudy, a),
        Cmd::PowerCurve(a) => (Command::PowerCurve, a),
        Cmd::OracleCheck(a) => (Command::OracleCheck, a),
        Cmd::ValidateAssumptions(a) => (Command::ValidateAssumptions, a),
    };
    match run(command, args) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("splitlab {}: {e}", command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
