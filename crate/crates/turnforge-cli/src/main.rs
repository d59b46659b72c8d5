//! Batch pipeline over conversation transcripts: ingest -> segment ->
//! intervals/features -> group statistics, plus a seeded synthetic corpus
//! generator.
//!
//! Data goes to files, logs go to stderr. Exit codes: 0 on success, 1 when
//! any conversation failed (the batch still completes), 2 on configuration
//! errors.

mod cmd_features;
mod cmd_intervals;
mod cmd_report;
mod cmd_segment;
mod cmd_stats;
mod cmd_synth;
mod config;
mod pipeline;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "turnforge",
    version,
    about = "Turn-taking mechanics for dyadic transcripts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment transcripts into turns under a selected turn model
    Segment(cmd_segment::SegmentArgs),
    /// Classify gaps, pauses, and overlaps on the communication-state grid
    Intervals(cmd_intervals::IntervalsArgs),
    /// Compute turn-level features with corpus-level weights and deciles
    Features(cmd_features::FeaturesArgs),
    /// Compare groups feature by feature with clustered statistics
    Stats(cmd_stats::StatsArgs),
    /// Generate synthetic conversations with a ground-truth sidecar
    Synth(cmd_synth::SynthArgs),
    /// Render a stats report JSON as an aligned text table
    Report(cmd_report::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Segment(args) => cmd_segment::run(args),
        Command::Intervals(args) => cmd_intervals::run(args),
        Command::Features(args) => cmd_features::run(args),
        Command::Stats(args) => cmd_stats::run(args),
        Command::Synth(args) => cmd_synth::run(args),
        Command::Report(args) => cmd_report::run(args),
    };
    match outcome {
        Ok(pipeline::RunStatus::Clean) => ExitCode::SUCCESS,
        Ok(pipeline::RunStatus::PartialFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
