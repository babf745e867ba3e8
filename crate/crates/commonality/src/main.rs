use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use commonality::error::EXIT_VALIDATION;
use commonality::{CliError, OutputLock, Run, RunConfig};
use commonality_core::verifier::VerifierSource;

/// Finds properties shared by groups of concepts: trains a bi-encoder on
/// concept-property pairs, retrieves candidate properties per concept,
/// verifies them and inverts the result into a commonality table.
#[derive(Debug, Parser)]
#[command(name = "commonality", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Candidates retrieved per concept [default: 50]
    #[arg(long, global = true, value_name = "N")]
    top_k: Option<usize>,
    /// Verifier threshold; pairs scoring at least this are kept [default: 0.75]
    #[arg(long, global = true, value_name = "X")]
    lambda: Option<f64>,
    #[arg(long, global = true, value_name = "MODE", value_parser = parse_source)]
    verifier: Option<VerifierSource>,
    /// External score file (concept, property, score)
    #[arg(long, global = true, value_name = "PATH")]
    scores: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Pair TSV inputs (replaces the configured list)
    #[arg(long, global = true, value_name = "PATH")]
    pairs: Vec<PathBuf>,
    /// Triple TSV inputs (replaces the configured list)
    #[arg(long, global = true, value_name = "PATH")]
    triples: Vec<PathBuf>,
    /// Enumerated-text inputs (replaces the configured list)
    #[arg(long, global = true, value_name = "PATH")]
    enumerated: Vec<PathBuf>,
    /// Minimum pair count for a property to enter the vocabulary [default: 2]
    #[arg(long, global = true, value_name = "N")]
    min_count: Option<u32>,
    /// Concept embedding TSV to cluster
    #[arg(long, global = true, value_name = "PATH")]
    embeddings: Option<PathBuf>,
    /// Training dataset JSONL
    #[arg(long, global = true, value_name = "PATH")]
    dataset: Option<PathBuf>,
    /// Test dataset JSONL for the toy classifier
    #[arg(long, global = true, value_name = "PATH")]
    test_dataset: Option<PathBuf>,
    /// Labeled pair TSV to score the assignment against
    #[arg(long, global = true, value_name = "PATH")]
    eval_pairs: Option<PathBuf>,
    /// Reference commonality TSV for Jaccard matching
    #[arg(long, global = true, value_name = "PATH")]
    gold_table: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse corpus files into deduplicated pairs and a property vocabulary
    Ingest,
    /// Train the bi-encoder on the ingested pairs
    Train,
    /// Embed the property vocabulary and the concepts
    Index,
    /// Retrieve the top-k properties of every concept
    Retrieve,
    /// Score candidates and keep those at or above lambda
    Verify,
    /// Invert the assignment into shared properties
    Commonalities,
    /// Cluster concept embeddings with affinity propagation
    Cluster,
    /// Add property and cluster labels to a dataset
    Augment,
    /// Compute metrics for the configured gold data
    Eval,
    /// ingest, train, index, retrieve, verify and commonalities in order
    Pipeline,
    /// Print the effective configuration as JSON
    ShowConfig,
}

fn parse_source(s: &str) -> Result<VerifierSource, String> {
    s.parse::<VerifierSource>().map_err(|e| e.to_string())
}

fn effective_config(cli: &Cli) -> commonality::error::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.top_k {
        cfg.retrieval.top_k = v;
    }
    if let Some(v) = cli.lambda {
        cfg.verifier.lambda = v;
    }
    if let Some(v) = cli.verifier {
        cfg.verifier.source = v;
    }
    if let Some(v) = cli.min_count {
        cfg.ingest.min_count = v;
    }
    let paths = &mut cfg.paths;
    for (flag, slot) in [
        (&cli.pairs, &mut paths.pairs),
        (&cli.triples, &mut paths.triples),
        (&cli.enumerated, &mut paths.enumerated),
    ] {
        if !flag.is_empty() {
            *slot = flag.clone();
        }
    }
    for (flag, slot) in [
        (&cli.scores, &mut paths.scores),
        (&cli.embeddings, &mut paths.embeddings),
        (&cli.dataset, &mut paths.dataset),
        (&cli.test_dataset, &mut paths.test_dataset),
        (&cli.eval_pairs, &mut paths.eval_pairs),
        (&cli.gold_table, &mut paths.gold_table),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if let Some(v) = &cli.out {
        paths.out = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> commonality::error::Result<()> {
    let cfg = effective_config(&cli)?;
    if let Command::ShowConfig = cli.command {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(());
    }
    let _lock = OutputLock::acquire(&cfg.paths.out)?;
    let run = Run::new(cfg);
    match cli.command {
        Command::Ingest => run.ingest().map(drop),
        Command::Train => run.train().map(drop),
        Command::Index => run.index().map(drop),
        Command::Retrieve => run.retrieve().map(drop),
        Command::Verify => run.verify().map(drop),
        Command::Commonalities => run.commonalities().map(drop),
        Command::Cluster => run.cluster().map(drop),
        Command::Augment => run.augment().map(drop),
        Command::Eval => run.eval().map(drop),
        Command::Pipeline => run.pipeline().map(drop),
        Command::ShowConfig => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COMMONALITY_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let reason = e.to_string();
            let err = CliError::validation("args", reason.lines().next().unwrap_or("invalid arguments"));
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e}");
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
