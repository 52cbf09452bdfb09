//! `vecmap` command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 inputs not aligned (missing
//! frames, unknown ids), 3 parse error, 4 infeasible request.

mod eval;
mod matching;
mod render;
mod split;
mod stream;
mod weights;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "vecmap", version, about = "Vectorized HD-map evaluation, matching, streaming replay and split auditing")]
struct Cli {
    /// Worker threads for parallel stages; defaults to available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chamfer-distance AP of predictions against ground truth.
    Eval(eval::Args),
    /// Dump per-frame cost matrices, optimal assignments and losses.
    Match(matching::Args),
    /// Replay the streaming decoder over a BEV sequence.
    Stream(stream::Args),
    /// Write a seeded weight set for `stream`.
    Weights(weights::Args),
    /// Propose a train/val split with minimal geographic overlap.
    Split(split::SplitArgs),
    /// Report the geographic overlap of an existing split.
    Audit(split::AuditArgs),
    /// Render one frame of a map file as SVG.
    Render(render::Args),
}

/// Inputs that do not line up: missing frames, unknown ids.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Misaligned(pub String);

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(v) = cause.downcast_ref::<vecmap::Error>() {
            return match v {
                vecmap::Error::FrameMismatch { .. } => 2,
                vecmap::Error::Parse { .. } | vecmap::Error::Format(_) => 3,
                vecmap::Error::Infeasible(_) => 4,
                _ => 1,
            };
        }
        if cause.is::<Misaligned>() {
            return 2;
        }
        if cause.is::<serde_json::Error>() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VECMAP_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let res = match cli.command {
        Command::Eval(a) => eval::run(a),
        Command::Match(a) => matching::run(a),
        Command::Stream(a) => stream::run(a),
        Command::Weights(a) => weights::run(a),
        Command::Split(a) => split::run_split(a),
        Command::Audit(a) => split::run_audit(a),
        Command::Render(a) => render::run(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
