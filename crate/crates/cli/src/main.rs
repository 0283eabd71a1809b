//! `lagcd`: corpus generation, baselines, toy-model training and evaluation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod baseline;
mod common;
mod error;
mod evaluate;
mod generate;
mod model;
mod params;

use error::CliResult;

#[derive(Parser)]
#[command(name = "lagcd", version, about = "Supervised temporal causal discovery toolkit")]
struct Cli {
    #[command(flatten)]
    globals: Globals,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Globals {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads (0 = all cores). Output does not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Seed for randomized commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Draw the seed from the operating system instead of requiring --seed.
    #[arg(long, global = true)]
    pub entropy: bool,
    /// JSON file with command settings; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic (or mixed) corpus into an existing directory.
    Generate(generate::GenerateArgs),
    /// Score a corpus with a classical baseline and report AUC.
    Baseline(baseline::BaselineArgs),
    /// Train the toy predictor on a corpus.
    Train(model::TrainArgs),
    /// Run a trained toy predictor on instances.
    Predict(model::PredictArgs),
    /// Compute AUC of stored score files against a corpus.
    Eval(evaluate::EvalArgs),
    /// Paired Wilcoxon tests between evaluation reports.
    Stats(evaluate::StatsArgs),
    /// Parameter count of the transformer architecture.
    Params(params::ParamsArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    let g = cli.globals;
    let jobs = g.jobs;
    lagcd_core::par::with_jobs(jobs, move || match cli.command {
        Command::Generate(a) => generate::run(&g, a),
        Command::Baseline(a) => baseline::run(&g, a),
        Command::Train(a) => model::train(&g, a),
        Command::Predict(a) => model::predict(&g, a),
        Command::Eval(a) => evaluate::eval(&g, a),
        Command::Stats(a) => evaluate::stats(&g, a),
        Command::Params(a) => params::run(&g, a),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
