//! Command-line pipeline: generate synthetic streams, train the encoder,
//! build category profiles, classify queries, and evaluate predictions.
//!
//! Exit codes: 0 on success, 2 on usage errors (bad flags), 3 on data
//! errors (missing or malformed inputs, inconsistent files).

mod commands;
mod config;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "sceneprof",
    version,
    about = "Scene similarity learning and distribution-based categorization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic stream with anchors.
    Gen(commands::gen::GenArgs),
    /// Train the encoder on a stream with anchor supervision.
    Train(commands::train::TrainArgs),
    /// Build one category profile per typical frame.
    Profile(commands::profile::ProfileArgs),
    /// Classify query frames against saved profiles.
    Classify(commands::classify::ClassifyArgs),
    /// Compare predictions with reference labels and report metrics.
    Evaluate(commands::evaluate::EvaluateArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => commands::gen::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Profile(args) => commands::profile::run(args),
        Command::Classify(args) => commands::classify::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(3);
    }
}
