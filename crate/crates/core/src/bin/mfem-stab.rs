use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfem_stab::cli::{parse_pairing, run, CliError, Command, RunOptions};
use mfem_stab::config::{ConfigError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "mfem-stab", version, about = "Coupled h-a / t-a finite elements with an inf-sup stability test")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a transient and write histories, profiles and oscillation metrics.
    Solve(Common),
    /// Run the inf-sup sweep (all four pairings unless --pairing is given).
    Infsup(Common),
    /// Write the refined mesh in native text format.
    Mesh(Common),
    /// Export an eigenmode of the inf-sup pencil.
    Eigenmode(Common),
    /// Print the JSON schema of the configuration file.
    Schema,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; defaults to the stacked-bar case.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Enrichment pairing `i,j`.
    #[arg(long, value_parser = parse_pairing)]
    pairing: Option<(u8, u8)>,
    /// Sweep refinements for infsup, mesh refinements otherwise.
    #[arg(long)]
    refinements: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn execute(cmd: Command, args: Common) -> Result<(), CliError> {
    let config = match &args.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::default(),
    };
    let opts = RunOptions { out: args.out, pairing: args.pairing, refinements: args.refinements, quiet: args.quiet };
    let summary = run(cmd, &config, &opts)?;
    if !opts.quiet {
        println!("{}", serde_json::to_string(&summary.json["result"]).unwrap_or_default());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            let err = CliError::Config(ConfigError::Invalid(e.kind().to_string()));
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let (cmd, args) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Infsup(a) => (Command::Infsup, a),
        Cmd::Mesh(a) => (Command::Mesh, a),
        Cmd::Eigenmode(a) => (Command::Eigenmode, a),
        Cmd::Schema => {
            println!("{}", serde_json::to_string_pretty(&ScenarioConfig::schema()).unwrap_or_default());
            return ExitCode::SUCCESS;
        }
    };
    match execute(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
