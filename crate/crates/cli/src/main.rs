//! `suspense`: batch driver for measure computation, evaluation, turning
//! points, agreement, mock embeddings and plots.
//!
//! Exit status is 0 on success, 2 when inputs or configuration are invalid
//! and 1 when writing results fails.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};

use commands::Output;
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "suspense",
    version,
    about = "Suspense measures over story embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute measure series for every story.
    Analyze(Common),
    /// Correlate measure series with human suspense judgements.
    Evaluate(Common),
    /// Predict and score turning points in synopses.
    TurningPoints(Common),
    /// Inter-annotator agreement and annotator screening.
    Agreement(Common),
    /// Deterministic token-hash embeddings for a story file.
    MockEmbed(Common),
    /// SVG chart of one story's measure series.
    Plot(Common),
}

#[derive(Args)]
struct Common {
    /// Flat TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override any configuration key, e.g. `--set rollout=2`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(out) = &self.out {
            let out = out
                .to_str()
                .ok_or_else(|| anyhow!("output path is not UTF-8"))?;
            overrides.push(("out".into(), toml::Value::String(out.into()).to_string()));
        }
        if let Some(seed) = self.seed {
            overrides.push(("seed".into(), seed.to_string()));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

type Runner = fn(&RunConfig) -> Result<Vec<Output>>;

fn compute(cli: &Cli) -> Result<Vec<Output>> {
    let (common, run): (&Common, Runner) = match &cli.command {
        Command::Analyze(c) => (c, commands::analyze),
        Command::Evaluate(c) => (c, commands::evaluate),
        Command::TurningPoints(c) => (c, commands::turning_points),
        Command::Agreement(c) => (c, commands::agreement),
        Command::MockEmbed(c) => (c, commands::mock_embed),
        Command::Plot(c) => (c, commands::plot),
    };
    run(&common.load()?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outputs = match compute(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match commands::write_outputs(&outputs) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
