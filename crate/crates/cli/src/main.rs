//! `gesture`: command-line front end for the gesture pipeline.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod config;
mod data;
mod manifest;
mod model;
mod report;
mod search;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "gesture", version, about = "Accelerometer gesture pipeline")]
#[command(args_override_self = true)]
struct Cli {
    /// Print a JSON summary on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for parallel steps (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Flat key = value file of subcommand flags; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<std::path::PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a labeled dataset.
    Generate(data::GenerateArgs),
    /// Cut a recording CSV into a dataset.
    Ingest(data::IngestArgs),
    /// Balance classes of a dataset by augmentation.
    Augment(data::AugmentArgs),
    /// Extract feature vectors from a dataset.
    Extract(data::ExtractArgs),
    /// Train one model.
    Train(model::TrainArgs),
    /// Evaluate a model on a dataset.
    Evaluate(model::EvaluateArgs),
    /// Genetic search over feature subsets and models.
    Automl(search::AutomlArgs),
    /// Measure inference latency.
    Profile(model::ProfileArgs),
    /// Export a model as a C header or an int8 model file.
    Export(model::ExportArgs),
    /// Merge evaluation results into a comparison table.
    Report(report::ReportArgs),
}

const SUBCOMMANDS: [&str; 10] = [
    "generate", "ingest", "augment", "extract", "train", "evaluate", "automl", "profile", "export",
    "report",
];

/// What a command prints when it is done.
#[derive(Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub out: String,
    pub lines: Vec<String>,
    pub data: serde_json::Value,
}

fn run(cli: Cli) -> Result<Summary> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, "--threads must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Generate(a) => data::generate(a),
        Command::Ingest(a) => data::ingest(a),
        Command::Augment(a) => data::augment(a),
        Command::Extract(a) => data::extract(a),
        Command::Train(a) => model::train(a),
        Command::Evaluate(a) => model::evaluate(a),
        Command::Automl(a) => search::automl(a),
        Command::Profile(a) => model::profile(a),
        Command::Export(a) => model::export(a),
        Command::Report(a) => report::report(a),
    }
}

fn main() -> ExitCode {
    let argv = match config::splice(std::env::args().collect(), &SUBCOMMANDS) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(s) => {
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&s).expect("summary serializes")
                );
            } else {
                for l in &s.lines {
                    println!("{l}");
                }
                println!("wrote {}", s.out);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
