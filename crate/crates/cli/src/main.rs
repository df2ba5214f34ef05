mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{DivergenceMode, EvaluateMode};
use config::RunConfig;
use crisisloc::{ClassSet, FeatureClass};

/// Crisis-region message classification pipeline.
#[derive(Debug, Parser)]
#[command(name = "crisisloc", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split the corpus into IR/OR/PC-IR/PC-OR/unlabeled files.
    Partition,
    /// Jensen-Shannon divergence matrices.
    Divergence {
        #[arg(long, value_enum)]
        mode: DivergenceMode,
    },
    /// Train a model on the IR/OR partitions.
    Train {
        /// Train on all IR and OR tweets instead of a balanced sample.
        #[arg(long)]
        no_balance: bool,
    },
    /// Cross-validation, class combinations or the imbalance sweep.
    Evaluate {
        #[arg(long, value_enum, default_value = "single")]
        mode: EvaluateMode,
    },
    /// Label tweets with a trained model.
    Classify {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Defaults to the unlabeled partition.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Top logistic-regression features per class.
    TopFeatures {
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Bigram clouds for geotagged IR tweets, with and without model-labeled additions.
    Cloud {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Fill missing ARK tag layers with the rule-based tagger.
    Tag {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Emit feature vectors as JSON Lines.
    Features {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Comma-separated classes (default: the configured classes, or all).
        #[arg(long, value_delimiter = ',')]
        classes: Vec<FeatureClass>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .context("this command needs --config <file>")?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn output_dir(cli: &Cli) -> Result<PathBuf> {
    if let Some(dir) = &cli.output_dir {
        return Ok(dir.clone());
    }
    Ok(match &cli.config {
        Some(_) => load_config(cli)?.output_dir,
        None => PathBuf::from("out"),
    })
}

fn run(cli: &Cli) -> Result<serde_json::Value> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    match &cli.command {
        Command::Partition => commands::partition(&load_config(cli)?),
        Command::Divergence { mode } => commands::divergence(&load_config(cli)?, *mode),
        Command::Train { no_balance } => commands::train(&load_config(cli)?, *no_balance),
        Command::Evaluate { mode } => commands::evaluate(&load_config(cli)?, *mode),
        Command::Classify { model, input } => {
            commands::classify(&load_config(cli)?, model.clone(), input.clone())
        }
        Command::TopFeatures { k } => commands::top_features_cmd(&load_config(cli)?, *k),
        Command::Cloud { model, input, k } => {
            commands::cloud(&load_config(cli)?, model.clone(), input.clone(), *k)
        }
        Command::Tag { input, output } => {
            let output = output
                .clone()
                .unwrap_or(output_dir(cli)?.join("tagged.jsonl"));
            commands::tag(input, &output)
        }
        Command::Features {
            input,
            output,
            classes,
        } => {
            let config = cli.config.as_ref().map(|_| load_config(cli)).transpose()?;
            let classes: ClassSet = if !classes.is_empty() {
                classes.iter().copied().collect()
            } else {
                config.as_ref().map_or(ClassSet::ALL, RunConfig::class_set)
            };
            let fallback = config.as_ref().is_none_or(|c| c.fallback_tagging);
            let output = output
                .clone()
                .unwrap_or(output_dir(cli)?.join("features.jsonl"));
            commands::features(input, &output, classes, fallback)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            // A closed pipe (e.g. `| head`) is not a failure of the run.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
