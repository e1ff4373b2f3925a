//! Command-line front end of the `fracsing` library.

mod commands;
mod manifest;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::solve::SolveArgs;
use commands::verify::Suite;
use settings::{GlobalArgs, Settings};

#[derive(Debug, Parser)]
#[command(name = "fracsing", version, about = "Singular solutions of fractional semilinear equations")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Asymptotic constant and derived exponents
    Constant,
    /// Run invariant suites on the exact singular solution
    Verify {
        #[arg(value_enum)]
        which: Suite,
    },
    /// Solve on an annulus with (perturbed) exact boundary data
    Solve(SolveArgs),
    /// Check that every output listed in a manifest exists and matches its digest
    CheckManifest { path: std::path::PathBuf },
}

/// Outcome classes of the exit-code contract.
#[derive(Debug)]
pub enum Failure {
    Verification(String),
    BadInput(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::BadInput(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::BadInput(m) | Failure::Solver(m) => m,
        }
    }
}

fn check_manifest(path: &std::path::Path) -> Result<(), Failure> {
    let m = manifest::RunManifest::load(path)?;
    let dir = path.parent().unwrap_or(std::path::Path::new("."));
    let bad = m.mismatches(dir);
    if bad.is_empty() {
        eprintln!("{} outputs match", m.outputs.len());
        Ok(())
    } else {
        Err(Failure::Verification(format!("missing or modified: {}", bad.join(", "))))
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Command::CheckManifest { path } = &cli.command {
        return check_manifest(path);
    }
    let settings = Settings::resolve(&cli.global)?;
    match &cli.command {
        Command::Constant => commands::constant::run(&settings),
        Command::Verify { which } => commands::verify::run(&settings, *which),
        Command::Solve(args) => commands::solve::run(&settings, args),
        Command::CheckManifest { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
