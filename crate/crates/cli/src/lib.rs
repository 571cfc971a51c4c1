//! Command-line front end: corpus curation, decoding simulation, scoring
//! and latency/quality curves.

pub mod config;
pub mod curate;
pub mod curve;
pub mod evaluate;
pub mod simulate;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "simt", version, about = "Simultaneous translation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter and merge a chunk-aligned corpus.
    Curate(curate::CurateArgs),
    /// Decode a corpus with a read/write policy and record traces.
    Simulate(simulate::SimulateArgs),
    /// Score traces against references.
    Evaluate(evaluate::EvaluateArgs),
    /// Collect reports into a latency/quality curve.
    Curve(curve::CurveArgs),
}

/// `Ok(false)` means the command finished but some records or inputs failed.
pub fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Curate(a) => curate::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Curve(a) => curve::run(a),
    }
}
