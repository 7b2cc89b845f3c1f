//! Command-line orchestration: ingest, index, train, expand, search,
//! eval and experiment, each writing write-once artifacts plus a manifest.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pqe_core::eval::ConfId;

use crate::commands::TrainScope;
use crate::config::PipelineConfig;
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "pqe", version, about = "Personalized query expansion experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Pipeline configuration (TOML).
    #[arg(long, short, global = true, env = "PQE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set embed.global.dim=100`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Overrides `paths.output_dir`.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and normalize the document and user files.
    Ingest,
    /// Build the inverted index over the ingested documents.
    Index,
    /// Train embeddings: `--scope global`, `--scope user <id>` or `--scope all-users`.
    Train {
        #[arg(long, num_args = 1..=2, value_names = ["SCOPE", "USER"], required = true)]
        scope: Vec<String>,
    },
    /// Export expanded queries for every topic.
    Expand {
        #[arg(long)]
        conf: ConfId,
        /// Overrides `expand.k`.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Rank documents for every topic, or for one ad-hoc `--query`.
    Search {
        #[arg(long, default_value = "Conf2")]
        conf: ConfId,
        /// Overrides `expand.k`.
        #[arg(long)]
        k: Option<usize>,
        /// Free-text query printed to stdout instead of writing a run file.
        #[arg(long)]
        query: Option<String>,
        /// User whose model expands an ad-hoc query.
        #[arg(long)]
        user: Option<String>,
        /// Hits shown for an ad-hoc query.
        #[arg(long, default_value_t = 10)]
        limit: usize,
    },
    /// Compute MAP, MRR and P@10 of a run file.
    Eval {
        #[arg(long)]
        run: PathBuf,
    },
    /// Run the configured experiment matrix, optionally sweeping k.
    Experiment {
        /// Overrides `expand.k`.
        #[arg(long)]
        k: Option<usize>,
        /// Inclusive range such as `1..10`.
        #[arg(long, value_name = "A..B")]
        sweep_k: Option<String>,
    },
}

impl Cli {
    pub fn config(&self) -> Result<PipelineConfig, CliError> {
        let mut overrides = Vec::new();
        if let Some(dir) = &self.global.output_dir {
            overrides.push(format!("paths.output_dir={:?}", dir.display().to_string()));
        }
        if let Some(seed) = self.global.seed {
            overrides.push(format!("seed={seed}"));
        }
        overrides.extend(self.global.overrides.iter().cloned());
        PipelineConfig::load(self.global.config.as_deref(), |k| std::env::var(k).ok(), &overrides)
    }
}

/// Execute a parsed command; returns the one-line summary.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = cli.config()?;
    let k_or = |k: Option<usize>| k.unwrap_or(cfg.expand.k);
    match &cli.command {
        Command::Ingest => commands::cmd_ingest(&cfg),
        Command::Index => commands::cmd_index(&cfg),
        Command::Train { scope } => commands::cmd_train(&cfg, &TrainScope::parse(scope)?),
        Command::Expand { conf, k } => commands::cmd_expand(&cfg, *conf, k_or(*k)),
        Command::Search {
            conf,
            k,
            query,
            user,
            limit,
        } => match query {
            Some(q) => commands::search_query(&cfg, *conf, k_or(*k), q, user.as_deref(), *limit),
            None => commands::cmd_search(&cfg, *conf, k_or(*k)),
        },
        Command::Eval { run } => commands::cmd_eval(&cfg, run),
        Command::Experiment { k, sweep_k } => {
            let range = sweep_k.as_deref().map(commands::parse_k_range).transpose()?;
            commands::cmd_experiment(&cfg, k_or(*k), range)
        }
    }
}
