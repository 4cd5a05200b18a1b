//! Command-line orchestration for the DG solver and DGNet training:
//! configuration, problem setup, commands and run manifests.

pub mod case;
pub mod commands;
pub mod config;
pub mod output;

use clap::{Parser, Subcommand};
use dgnet_core::DgError;

use commands::{analyze, convergence, generate, histogram, solve, train, wave_speed};

#[derive(Debug, Parser)]
#[command(name = "dgnet", version, about = "Nodal DG solver for the Euler equations and DGNet surrogate training")]
pub struct Cli {
    /// Worker threads [default: all cores].
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    GenerateData(generate::GenerateArgs),
    Train(train::TrainArgs),
    Solve(solve::SolveArgs),
    Analyze(analyze::AnalyzeArgs),
    Convergence(convergence::ConvergenceArgs),
    WaveSpeed(wave_speed::WaveSpeedArgs),
    Histogram(histogram::HistogramArgs),
}

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Exit status for an error: 2 for bad input, 3 for numerical failure.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let Some(dg) = err.chain().find_map(|e| e.downcast_ref::<DgError>()) else {
        return EXIT_FAILURE;
    };
    match dg {
        DgError::NonPhysical { .. }
        | DgError::NonFinite(_)
        | DgError::NewtonDiverged { .. }
        | DgError::GmresStagnation { .. }
        | DgError::Step { .. }
        | DgError::ZeroNorm => EXIT_NUMERICAL,
        DgError::Io(_) => EXIT_FAILURE,
        _ => EXIT_CONFIG,
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| DgError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::GenerateData(a) => generate::run(a),
        Command::Train(a) => train::run(a),
        Command::Solve(a) => solve::run(a),
        Command::Analyze(a) => analyze::run(a),
        Command::Convergence(a) => convergence::run(a),
        Command::WaveSpeed(a) => wave_speed::run(a),
        Command::Histogram(a) => histogram::run(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        let step = DgError::Step { step: 3, source: Box::new(DgError::NonPhysical { element: 1 }) };
        assert_eq!(exit_code(&anyhow::Error::from(step)), EXIT_NUMERICAL);
        assert_eq!(exit_code(&anyhow::Error::from(DgError::Config("x".into()))), EXIT_CONFIG);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), EXIT_FAILURE);
    }

    #[test]
    fn documented_invocation_parses() {
        let cli = Cli::try_parse_from(["dgnet", "solve", "--engine", "dg", "--problem", "sod", "--K", "250", "--N", "1", "--T", "0.25", "--dt", "1e-4"]).unwrap();
        assert!(matches!(cli.command, Command::Solve(_)));
        assert!(Cli::try_parse_from(["dgnet", "solve", "--bogus"]).is_err());
    }
}
