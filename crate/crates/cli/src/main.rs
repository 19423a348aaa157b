//! `polifilter`: privacy-policy classification with explained, verified
//! reasons.
//!
//! Settings come from an optional flat `key = value` file given with
//! `--config`; flags override it. Exit codes: 0 success, 2 input or
//! validation error, 3 backend failure.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polifilter_core::metrics::ExplainScope;

use commands::{ClassifyArgs, EvaluateArgs, IngestArgs, SideArg};
use config::{RunConfig, Settings};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "polifilter",
    version,
    about = "Explained and verified privacy-policy classification"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Flat `key = value` run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override any configuration key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, conflicts_with = "endpoint")]
    mock_script: Option<PathBuf>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// `lexical` or the URL of a remote scorer.
    #[arg(long, global = true)]
    verifier: Option<String>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Disable the response cache.
    #[arg(long, global = true)]
    no_cache: bool,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// More log output on stderr; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Import a raw OPP-115 directory into a canonical corpus file.
    Ingest {
        #[arg(long)]
        raw: Option<PathBuf>,
        /// Tier mapping CSV replacing the built-in one.
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        split: SplitArgs,
        /// Report unmappable categories instead of failing.
        #[arg(long)]
        skip_unmappable: bool,
        /// Keep segments without any annotation.
        #[arg(long)]
        include_unannotated: bool,
    },
    /// Reassign the train/test policies of a canonical corpus.
    Split {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Build the verifier's training set from training paragraphs.
    BuildEntailmentSet {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "train")]
        side: SideArg,
    },
    /// Run the full pipeline and write predictions.
    Classify {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        side: SideArg,
        /// Also score the stage ablation and write ablation.{json,txt}.
        #[arg(long)]
        ablation: bool,
    },
    /// Score predictions; writes report.json, report.txt and scatter.csv.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        side: SideArg,
        /// Predictions whose reasons are compared with gold excerpts.
        #[arg(long, value_enum, default_value = "accepted")]
        scope: ScopeArg,
    },
    /// Gold labels with randomly sampled reasons.
    BaselineRandom {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        side: SideArg,
    },
    /// Compare evaluation reports side by side.
    Report {
        /// `NAME=report.json`, one per method.
        #[arg(required = true, value_name = "NAME=PATH")]
        inputs: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    train_policies: Option<usize>,
    #[arg(long)]
    test_policies: Option<usize>,
    /// Comma-separated training policy ids.
    #[arg(long, requires = "test_list", conflicts_with_all = ["train_policies", "test_policies"])]
    train_list: Option<String>,
    #[arg(long, requires = "train_list")]
    test_list: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeArg {
    Accepted,
    All,
}

impl From<ScopeArg> for ExplainScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Accepted => ExplainScope::Accepted,
            ScopeArg::All => ExplainScope::All,
        }
    }
}

fn settings(global: &GlobalArgs, command: &Command) -> Result<Settings, CliError> {
    let mut s = match &global.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    for kv in &global.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        s.override_with(k.trim(), v.trim())?;
    }
    let path = |p: &PathBuf| p.display().to_string();
    let mut flags: Vec<(&str, String)> = Vec::new();
    flags.extend(global.corpus.as_ref().map(|p| ("corpus", path(p))));
    flags.extend(global.seed.map(|v| ("seed", v.to_string())));
    flags.extend(global.mock_script.as_ref().map(|p| ("mock_script", path(p))));
    flags.extend(global.endpoint.clone().map(|v| ("endpoint", v)));
    flags.extend(global.model.clone().map(|v| ("model", v)));
    flags.extend(global.verifier.clone().map(|v| ("verifier", v)));
    flags.extend(global.threshold.map(|v| ("threshold", v.to_string())));
    flags.extend(global.concurrency.map(|v| ("concurrency", v.to_string())));
    flags.extend(global.cache_dir.as_ref().map(|p| ("cache_dir", path(p))));
    if global.no_cache {
        flags.push(("cache_dir", "none".into()));
    }
    flags.extend(global.out_dir.as_ref().map(|p| ("out_dir", path(p))));
    match command {
        Command::Ingest {
            raw, mapping, split, ..
        } => {
            flags.extend(raw.as_ref().map(|p| ("raw_dir", path(p))));
            flags.extend(mapping.as_ref().map(|p| ("mapping", path(p))));
            split_flags(split, &mut flags);
        }
        Command::Split { split, .. } => split_flags(split, &mut flags),
        _ => {}
    }
    for (k, v) in flags {
        s.override_with(k, &v)?;
    }
    Ok(s)
}

fn split_flags(split: &SplitArgs, flags: &mut Vec<(&str, String)>) {
    flags.extend(split.train_policies.map(|v| ("train_policies", v.to_string())));
    flags.extend(split.test_policies.map(|v| ("test_policies", v.to_string())));
    flags.extend(split.train_list.clone().map(|v| ("train_list", v)));
    flags.extend(split.test_list.clone().map(|v| ("test_list", v)));
}

fn parse_inputs(inputs: &[String]) -> Result<Vec<(String, PathBuf)>, CliError> {
    inputs
        .iter()
        .map(|i| match i.split_once('=') {
            Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
            _ => Err(CliError::Input(format!("expected NAME=PATH, got `{i}`"))),
        })
        .collect()
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Command::Report { inputs, out } = cli.command {
        return commands::report(&parse_inputs(&inputs)?, out);
    }
    let config = RunConfig::from_settings(&settings(&cli.global, &cli.command)?)?;
    match cli.command {
        Command::Ingest {
            out,
            skip_unmappable,
            include_unannotated,
            ..
        } => commands::ingest(
            &config,
            IngestArgs {
                out,
                skip_unmappable,
                include_unannotated,
            },
        ),
        Command::Split { out, .. } => commands::split(&config, out),
        Command::BuildEntailmentSet { out, side } => commands::build_entailment_set(&config, out, side),
        Command::Classify { out, side, ablation } => commands::classify(&config, ClassifyArgs { out, side, ablation }),
        Command::Evaluate {
            predictions,
            side,
            scope,
        } => commands::evaluate_cmd(
            &config,
            EvaluateArgs {
                predictions,
                side,
                scope: scope.into(),
            },
        ),
        Command::BaselineRandom { out, side } => commands::baseline_random(&config, out, side),
        Command::Report { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.global.quiet, cli.global.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
