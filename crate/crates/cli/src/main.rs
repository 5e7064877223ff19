use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use popbias_cli::{
    cmd_correlate, cmd_desiderata, cmd_evaluate, cmd_fit, cmd_ingest, format_fit, parse_mode, FitSource, Overrides,
    RunConfig, DEFAULT_OUT,
};
use popbias_llm::Dialect;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProviderArg {
    Stub,
    Openai,
    Anthropic,
}

impl From<ProviderArg> for Dialect {
    fn from(p: ProviderArg) -> Self {
        match p {
            ProviderArg::Stub => Dialect::Stub,
            ProviderArg::Openai => Dialect::OpenAi,
            ProviderArg::Anthropic => Dialect::Anthropic,
        }
    }
}

/// Popularity-bias evaluation of movie recommenders.
#[derive(Debug, Parser)]
#[command(name = "popbias", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for fold sampling and randomized recommenders.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fail on the first malformed input line instead of skipping it.
    #[arg(long, global = true)]
    strict_parse: bool,
    /// LLM provider dialect for WOK recommenders.
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderArg>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a MovieLens-format directory and write a catalog index.
    Ingest { dir: Option<PathBuf> },
    /// Fit a power law to a score file or to a dataset's rating counts.
    Fit {
        /// Directory with movies.dat and ratings.dat.
        dir: Option<PathBuf>,
        /// File with one score per line.
        #[arg(long, conflicts_with = "dir")]
        scores: Option<PathBuf>,
        #[arg(long)]
        x_min: Option<f64>,
    },
    /// Run the fold-based evaluation described by --config.
    Evaluate {
        /// Data directory, overriding the config.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Check every metric against every desideratum.
    Desiderata {
        /// Restrict to these metrics (repeatable or comma separated).
        #[arg(long)]
        metric: Vec<String>,
    },
    /// Kendall tau between metrics across the rows of one or more report CSVs.
    Correlate {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        metrics: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<String> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        strict_parse: cli.strict_parse,
        provider: cli.provider.map(Into::into),
        data: match &cli.command {
            Command::Ingest { dir: Some(d) }
            | Command::Fit { dir: Some(d), .. }
            | Command::Evaluate { data: Some(d) } => Some(d.clone()),
            _ => None,
        },
    };
    cfg.apply(&overrides);
    let mode = parse_mode(cfg.strict_parse);
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    match cli.command {
        Command::Ingest { .. } => {
            let summary = cmd_ingest(cfg.data_dir()?, &out, mode)?;
            Ok(format!("{summary}\nindex written to {}", out.join("catalog_index.json").display()))
        }
        Command::Fit { scores, x_min, .. } => {
            let source = match &scores {
                Some(p) => FitSource::Scores(p),
                None => FitSource::Dataset(cfg.data_dir().context("give a data directory or --scores")?),
            };
            Ok(format_fit(&cmd_fit(source, x_min, mode)?))
        }
        Command::Evaluate { .. } => {
            let res = cmd_evaluate(&cfg)?;
            Ok(format!("{}\nreports written to {}", res.summary(), res.out_dir.display()))
        }
        Command::Desiderata { metric } => Ok(cmd_desiderata(&metric, cli.seed)?.render()),
        Command::Correlate { reports, metrics } => {
            let m = cmd_correlate(&reports, &metrics)?;
            if cli.out.is_some() {
                std::fs::create_dir_all(&out)?;
                std::fs::write(out.join("correlation.csv"), m.to_csv())?;
            }
            Ok(m.to_csv())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            println!("{}", text.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
