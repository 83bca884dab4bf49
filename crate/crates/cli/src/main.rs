//! `axon`: check, describe and run graph-description files.
//!
//! Exit codes: 0 clean, 1 findings or runtime error, 2 usage or schema error.

mod commands;
mod session;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "axon",
    version,
    about = "Type-check and run neural module graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Type-check and validate a graph; print one line per finding.
    Check(Common),
    /// Print instances, port types, topological order and bindings.
    Describe(Common),
    /// Run the graph's training action.
    Train(Common),
    /// Evaluate every scalar sink over the data in file order.
    Eval(Common),
    /// Evaluate every sink and write the tensors to `--out`.
    Infer(Common),
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Graph-description file.
    pub graph: PathBuf,
    /// Repair TRANSPOSE_SAME connections with an inserted transpose.
    #[arg(long)]
    pub auto_cast: bool,
    /// Override the graph and action seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path: final checkpoint for train, tensor dump for infer.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tags file replacing the shipped hierarchy.
    #[arg(long)]
    pub tags: Option<PathBuf>,
    /// Override the action's step budget.
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Machine-readable output for check and describe.
    #[arg(long)]
    pub json: bool,
}

/// Process outcome, mapped onto the exit-code contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Findings,
    Usage,
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> Self {
        ExitCode::from(match o {
            Outcome::Clean => 0,
            Outcome::Findings => 1,
            Outcome::Usage => 2,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check(c) => commands::check(&c),
        Command::Describe(c) => commands::describe(&c),
        Command::Train(c) => commands::train(&c),
        Command::Eval(c) => commands::eval(&c),
        Command::Infer(c) => commands::infer(&c),
    }
    .into()
}
