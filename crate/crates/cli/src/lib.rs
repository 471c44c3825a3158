//! Command-line front end: `split`, `pretrain`, `train`, `evaluate` and
//! `analyze` over CSV inputs or a generated planted benchmark.

use std::fmt;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod provenance;

pub use config::{ConfigFlags, RunConfig};

/// A failure with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const DIVERGENCE: i32 = 4;

    pub fn config(msg: impl Into<String>) -> Self {
        CliError {
            code: Self::CONFIG,
            message: msg.into(),
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError {
            code: Self::DATA,
            message: msg.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<drugrank::Error> for CliError {
    fn from(e: drugrank::Error) -> Self {
        use drugrank::Error as E;
        let code = match &e {
            E::Config(_) => Self::CONFIG,
            E::Divergence { .. } => Self::DIVERGENCE,
            E::Numeric(_) => 1,
            E::Shape(_) | E::Domain(_) | E::Parse { .. } | E::Io { .. } | E::Checkpoint { .. } => Self::DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "drugrank", version, about = "Listwise drug ranking from expression and fingerprints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assign cell lines to stratified leave-cell-lines-out folds
    Split(ConfigFlags),
    /// Pretrain one expression autoencoder per fold
    Pretrain(ConfigFlags),
    /// Finetune the ranker of every fold
    Train(ConfigFlags),
    /// Score held-out cells and write the metric report
    Evaluate(ConfigFlags),
    /// Similarity, kNN and clustering analyses of learned embeddings
    Analyze(ConfigFlags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Split(_) => "split",
            Command::Pretrain(_) => "pretrain",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Analyze(_) => "analyze",
        }
    }

    fn flags(&self) -> &ConfigFlags {
        match self {
            Command::Split(f)
            | Command::Pretrain(f)
            | Command::Train(f)
            | Command::Evaluate(f)
            | Command::Analyze(f) => f,
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(cli.command.flags())?;
    let name = cli.command.name();
    match &cli.command {
        Command::Split(_) => commands::split(&cfg, name),
        Command::Pretrain(_) => commands::pretrain(&cfg, name),
        Command::Train(_) => commands::train(&cfg, name),
        Command::Evaluate(_) => commands::evaluate(&cfg, name),
        Command::Analyze(_) => commands::analyze(&cfg, name),
    }
}
