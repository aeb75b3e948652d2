//! Command-line front end: instance generation, solving, bound grids,
//! containment checks and dual certificates.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use senselab::SenseError;

pub mod certify;
pub mod config;
pub mod contour;
pub mod gen;
pub mod output;
pub mod solve;
pub mod verify;

/// Bad arguments or inputs; exits with code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// At least one verification trial failed; exits with code 4.
#[derive(Debug, thiserror::Error)]
#[error("verification failed: {0}")]
pub struct VerificationFailed(pub String);

#[derive(Debug, Parser)]
#[command(name = "senselab", version, about = "Noisy low-rank matrix sensing experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance and save it as JSON.
    Gen(gen::GenArgs),
    /// Run (perturbed) gradient descent on an instance.
    Solve(solve::SolveArgs),
    /// Tabulate bound grids as CSV files.
    Contour(ContourArgs),
    /// Check error containment over random trials.
    Verify(verify::VerifyArgs),
    /// Build and check dual certificates at a saved solution.
    Certify(certify::CertifyArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct ContourArgs {
    #[arg(long, value_enum)]
    pub figure: contour::Figure,
    /// JSON experiment config; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn run_contour(args: &ContourArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => config::ExperimentConfig::load(path).map_err(|e| UsageError(format!("{e:#}")))?,
        None => config::ExperimentConfig::default(),
    };
    cfg.validate().map_err(|e| UsageError(format!("{e:#}")))?;
    let tables = contour::contour_tables(args.figure, &cfg)?;
    for t in &tables {
        output::write_atomic(&args.out.join(&t.name), &t.to_csv())?;
    }
    println!("wrote {} tables to {}", tables.len(), args.out.display());
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SENSELAB_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| UsageError(format!("SENSELAB_THREADS must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().context("building thread pool")
}

pub fn run(cli: Cli) -> Result<()> {
    thread_pool()?.install(|| match &cli.command {
        Command::Gen(a) => gen::run(a),
        Command::Solve(a) => solve::run(a),
        Command::Contour(a) => run_contour(a),
        Command::Verify(a) => verify::run(a).map(|_| ()),
        Command::Certify(a) => certify::run(a).map(|_| ()),
    })
}

/// 3 for divergence, 4 for failed verification, 2 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<VerificationFailed>().is_some() {
        4
    } else if matches!(err.downcast_ref::<SenseError>(), Some(SenseError::Divergence { .. })) {
        3
    } else {
        2
    }
}
