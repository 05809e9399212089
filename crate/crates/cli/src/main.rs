//! bgsp: scattering lengths, Gross-Pitaevskii ground states, Bogoliubov
//! excitation spectra and their Fock-space cross-checks, driven by one
//! TOML config per run.
//!
//! Exit codes: 0 all verdicts pass, 2 config error, 3 numerical failure,
//! 4 internal error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod config;
mod pipeline;
mod report;

use config::RunConfig;
use report::RunReport;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {}", m),
            CliError::Numerical(m) => write!(f, "numerical failure: {}", m),
            CliError::Internal(m) => write!(f, "internal error: {}", m),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<bgsp_core::Error> for CliError {
    fn from(e: bgsp_core::Error) -> Self {
        use bgsp_core::Error as E;
        match e {
            E::NonIntegrablePotential(_)
            | E::NegativePotential { .. }
            | E::GridMismatch(_)
            | E::CutoffTooSmall { .. }
            | E::UnderresolvedGrid(_)
            | E::UnderresolvedKernel(_)
            | E::UnsupportedBasis(_)
            | E::InsufficientEllValues(_)
            | E::InsufficientSamplePoints(_)
            | E::DimensionOverflow { .. }
            | E::BoxTooSmall { .. }
            | E::DegenerateQuadrature(_)
            | E::ExplosionGuard { .. }
            | E::CapMismatch { .. }
            | E::Parse(_) => CliError::Config(e.to_string()),
            E::AsymptoteFitFailure { .. }
            | E::NonConvergence { .. }
            | E::NonPositiveD { .. }
            | E::IndefiniteInner { .. }
            | E::SingularE { .. }
            | E::SingularD { .. }
            | E::NonConvergentTruncation
            | E::TruncationLeak { .. } => CliError::Numerical(e.to_string()),
            E::Io(_) => CliError::Internal(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "bgsp", version, about = "Bogoliubov excitation spectra for trapped dilute Bose gases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.json and stage CSVs
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed from the config
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Scattering length and truncated-solution identities
    Scatter(CommonArgs),
    /// Gross-Pitaevskii ground state
    Gp(CommonArgs),
    /// Full pipeline: operators, E and E_inf, many-body levels
    Spectrum(CommonArgs),
    /// Truncated-Fock brute-force cross-check of the diagonalization
    FockCheck(CommonArgs),
    /// The whole invariant battery on reference configurations
    Verify(CommonArgs),
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Scatter(a) => ("scatter", a),
        Command::Gp(a) => ("gp", a),
        Command::Spectrum(a) => ("spectrum", a),
        Command::FockCheck(a) => ("fock-check", a),
        Command::Verify(a) => ("verify", a),
    };
    match execute(name, args, &cli.command) {
        Ok(all_pass) => {
            if all_pass {
                0
            } else {
                eprintln!("bgsp {}: one or more verdicts failed", name);
                3
            }
        }
        Err(e) => {
            eprintln!("bgsp {}: {}", name, e);
            e.exit_code()
        }
    }
}

fn execute(name: &str, args: &CommonArgs, command: &Command) -> Result<bool, CliError> {
    let started = std::time::Instant::now();
    let cfg = RunConfig::load(&args.config)?;
    if !cfg.roundtrips() {
        return Err(CliError::Config("config does not round-trip through serialization".into()));
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    let config_echo = serde_json::to_value(&cfg)
        .map_err(|e| CliError::Internal(format!("config echo failed: {}", e)))?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {}", args.out.display(), e)))?;

    let mut report = RunReport::new(name, seed, config_echo);
    let result = match command {
        Command::Scatter(_) => pipeline::cmd_scatter(&cfg, &args.out, &mut report),
        Command::Gp(_) => pipeline::cmd_gp(&cfg, &args.out, &mut report),
        Command::Spectrum(_) => pipeline::cmd_spectrum(&cfg, &args.out, &mut report),
        Command::FockCheck(_) => pipeline::cmd_fock_check(&cfg, &mut report),
        Command::Verify(_) => pipeline::cmd_verify(seed, &mut report),
    };
    // stage errors still produce a report before the error propagates
    report.write(&args.out)?;
    eprintln!("[timing] total {}: {:?}", name, started.elapsed());
    result?;
    Ok(report.all_pass())
}
