//! `entangler`: declarative runner for the simulation core. A scenario
//! lives in a TOML file; every command renders CSV with a provenance
//! header, so re-running a config reproduces the artifact byte for byte.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use entangler_cli::config::RawConfig;
use entangler_cli::output::config_hash;
use entangler_cli::{commands, CliError};

#[derive(Parser)]
#[command(
    name = "entangler",
    version,
    about = "Two-mode entangled-state protocol runner (units of g throughout)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print dispersive shifts, the shift ratio and the planned tone frequencies.
    Shifts(CommonArgs),
    /// Run one scenario and print its outcome row.
    Simulate(CommonArgs),
    /// Run the Cartesian product of the sweep axes, one outcome row per point.
    Sweep(CommonArgs),
    /// Scan for spectator transitions near resonance, or sweep the shift ratio.
    Collisions(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override a config value by dotted path, e.g. --set drive.omega=2e-3.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write the CSV here (defaults to the config's output path, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fill the wall_ms column (left empty by default so reruns are byte-identical).
    #[arg(long)]
    timing: bool,
}

fn load(args: &CommonArgs) -> Result<(RawConfig, String), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let mut raw = RawConfig::parse(&text)?;
    for assignment in &args.set {
        let (path, value) = assignment.split_once('=').ok_or_else(|| {
            CliError::Config(format!("--set needs KEY=VALUE, got {assignment:?}"))
        })?;
        raw.set(path.trim(), value.trim())?;
    }
    let hash = config_hash(&raw.canonical()?);
    Ok((raw, hash))
}

fn emit(args: &CommonArgs, raw: &RawConfig, csv: Vec<u8>) -> Result<(), CliError> {
    let destination = args.out.as_ref().or(raw.output.as_ref());
    match destination {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(&csv)
            .map_err(|e| CliError::Config(format!("cannot write to stdout: {e}"))),
    }
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Command::Shifts(a) => ("shifts", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Collisions(a) => ("collisions", a),
    };
    let (raw, hash) = load(args)?;
    let csv = match command {
        "shifts" => commands::cmd_shifts(&raw, &hash)?,
        "simulate" => commands::cmd_simulate(&raw, &hash, args.timing)?,
        "sweep" => commands::cmd_sweep(&raw, &hash, args.timing)?,
        _ => commands::cmd_collisions(&raw, &hash)?,
    };
    emit(args, &raw, csv)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Guard(_) => ExitCode::from(3),
            }
        }
    }
}
