//! `emocov`: build and score categorical emotion models from word vectors.

mod config;
mod evaluate;
mod pipeline;
mod plotting;
mod run;
mod vad;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emocov_core::{ErrorCategory, RunManifest};
use serde::{Deserialize, Serialize};

use crate::run::{Run, UsageError};

const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (vector cache format 1, manifest format 1)"
);

#[derive(Parser, Debug)]
#[command(name = "emocov", version = VERSION, about = "Build and score categorical emotion models from word vectors")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Directory for every output file [default: out]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Master seed; stage seeds are derived from it [default: 42]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with defaults; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Grow a seed word list with neighbours of every seed pair's average
    Expand(pipeline::ExpandArgs),
    /// Reduce a lexicon with UMAP, PCA or SVD
    Reduce(pipeline::ReduceArgs),
    /// Hierarchically cluster reduced coordinates and locate the elbow
    Cluster(pipeline::ClusterArgs),
    /// Extract one language's top cluster summary words
    Summarize(pipeline::SummarizeArgs),
    /// Merge per-language summaries into one model in the pivot language
    Aggregate(pipeline::AggregateArgs),
    /// Score models by coverage of a concept list
    Coverage(evaluate::CoverageArgs),
    /// Score models by recoverable information
    Recover(evaluate::RecoverArgs),
    /// Tabulate coverage and recovery for several models and languages
    EvaluateSuite(evaluate::SuiteArgs),
    /// Summarize an annotation table by category and VAD dimension
    AnalyzeVad(vad::VadArgs),
    /// Render a module-emitted table as SVG
    Plot(plotting::PlotArgs),
    /// Repeat a previous run from its manifest
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Expand(_) => "expand",
            Command::Reduce(_) => "reduce",
            Command::Cluster(_) => "cluster",
            Command::Summarize(_) => "summarize",
            Command::Aggregate(_) => "aggregate",
            Command::Coverage(_) => "coverage",
            Command::Recover(_) => "recover",
            Command::EvaluateSuite(_) => "evaluate-suite",
            Command::AnalyzeVad(_) => "analyze-vad",
            Command::Plot(_) => "plot",
            Command::Rerun(_) => "rerun",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct RerunArgs {
    /// Manifest written by an earlier run
    #[arg(long)]
    manifest: PathBuf,
}

fn execute(command: Command, run: &mut Run) -> anyhow::Result<()> {
    match command {
        Command::Expand(a) => pipeline::expand(a, run),
        Command::Reduce(a) => pipeline::reduce(a, run),
        Command::Cluster(a) => pipeline::cluster(a, run),
        Command::Summarize(a) => pipeline::summarize(a, run),
        Command::Aggregate(a) => pipeline::aggregate(a, run),
        Command::Coverage(a) => evaluate::coverage(a, run),
        Command::Recover(a) => evaluate::recover(a, run),
        Command::EvaluateSuite(a) => evaluate::suite(a, run),
        Command::AnalyzeVad(a) => vad::analyze(a, run),
        Command::Plot(a) => plotting::plot(a, run),
        Command::Rerun(_) => Err(UsageError("a manifest cannot re-run another rerun".into()).into()),
    }
}

fn start(cli: Cli) -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let Command::Rerun(r) = &cli.command {
        return rerun(&r.manifest, cli.global.out_dir, args);
    }
    let cfg = config::Config::load(cli.global.config.as_deref())?;
    let seed = cli.global.seed.or(cfg.seed).unwrap_or(42);
    let out_dir = cli
        .global
        .out_dir
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let command = cfg.resolve(cli.command)?;
    let mut run = Run::new(command.name(), args, seed, out_dir, &command)?;
    if let Some(path) = &cli.global.config {
        run.input(path)?;
    }
    execute(command, &mut run)?;
    run.finish()
}

fn rerun(manifest_path: &std::path::Path, out_dir: Option<PathBuf>, args: Vec<String>) -> anyhow::Result<()> {
    let old = RunManifest::read(manifest_path)?;
    let invocation = old
        .hyperparameters
        .get("invocation")
        .cloned()
        .ok_or_else(|| UsageError(format!("{}: manifest has no recorded invocation", manifest_path.display())))?;
    let command: Command = serde_json::from_value(invocation)
        .map_err(|e| UsageError(format!("{}: cannot read invocation: {e}", manifest_path.display())))?;
    for (path, digest) in &old.inputs {
        let now = emocov_core::manifest::sha256_file(path)?;
        if &now != digest {
            anyhow::bail!(emocov_core::Error::InvalidParameter(format!(
                "input {path} changed since the recorded run (sha256 {digest}, now {now})"
            )));
        }
    }
    let out_dir = out_dir.unwrap_or_else(|| manifest_path.parent().map(PathBuf::from).unwrap_or_default());
    let mut run = Run::new(command.name(), args, old.seed, out_dir, &command)?;
    run.manifest.assumptions.push(format!("re-run of {}", manifest_path.display()));
    for path in old.inputs.keys() {
        run.input(path)?;
    }
    execute(command, &mut run)?;
    run.finish()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<emocov_core::Error>() {
        Some(e) if e.category() == ErrorCategory::Numeric => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match start(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn version_names_cache_format() {
        let expected = format!("vector cache format {}", emocov_core::embedding::CACHE_VERSION);
        assert!(VERSION.contains(&expected));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&UsageError("x".into()).into()), 2);
        assert_eq!(exit_code(&emocov_core::Error::EmptyLexicon.into()), 3);
        assert_eq!(exit_code(&emocov_core::Error::SingularSystem { lambda: 0.0 }.into()), 4);
    }
}
