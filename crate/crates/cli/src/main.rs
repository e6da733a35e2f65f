//! `sbm-mrf` command-line pipeline.
//!
//! Every subcommand writes its outputs under `--out` together with a
//! `manifest.json` of the effective parameters.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sbm_mrf::{SelectionMethod, ShiftMode};

#[derive(Debug, Parser)]
#[command(
    name = "sbm-mrf",
    version,
    about = "Taxonomy-aware community detection for co-occurrence networks"
)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate a co-occurrence network from an abundance table.
    Network(NetworkArgs),
    /// Fit the model for one K.
    Fit(FitArgs),
    /// Fit a grid of K values and choose one by BIC.
    SelectK(SelectKArgs),
    /// Generate synthetic networks with planted communities.
    Simulate(SimulateArgs),
    /// Compare fitted labels against a truth table.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args, Serialize)]
struct NetworkArgs {
    /// Abundance CSV (`sample_id,<taxon>,...`).
    #[arg(long)]
    abundance: PathBuf,
    /// Taxonomy CSV (`taxon,parent`); also writes the taxonomy network.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Edges need a BH-adjusted p-value strictly below this.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = ShiftMode::Shifted)]
    shift: ShiftMode,
    /// Keep taxa non-zero in at least this many samples.
    #[arg(long, default_value_t = 7)]
    min_nonzero: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Where G and Q come from.
#[derive(Debug, Args, Serialize)]
struct GraphArgs {
    /// Dense adjacency CSV for G.
    #[arg(long, conflicts_with = "edges", required_unless_present = "edges")]
    network: Option<PathBuf>,
    /// Weighted edge list for G; every listed pair with positive weight is an edge.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// With `--edges`, Q links pairs whose weight is strictly above this.
    #[arg(long, requires = "edges", conflicts_with_all = ["taxonomy", "q_network"])]
    q_threshold: Option<f64>,
    /// Taxonomy CSV; Q links taxa sharing a parent.
    #[arg(long, conflicts_with = "q_network")]
    taxonomy: Option<PathBuf>,
    /// Dense adjacency CSV for Q.
    #[arg(long)]
    q_network: Option<PathBuf>,
}

/// Sampler settings shared by `fit` and `select-k`.
#[derive(Debug, Args, Serialize)]
struct SamplerArgs {
    /// MRF coupling; 0 gives the standard SBM.
    #[arg(long, default_value_t = 1.0)]
    f: f64,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    a_omega: f64,
    #[arg(long, default_value_t = 1.0)]
    b_omega: f64,
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SelectKArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// `lo:hi` (inclusive) or a comma-separated list.
    #[arg(long, default_value = "2:12")]
    grid: commands::KGrid,
    #[arg(long, default_value_t = SelectionMethod::MinBic)]
    method: SelectionMethod,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long, default_value_t = 50)]
    replicates: usize,
    /// Scenario i of the suite uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict to these scenarios, e.g. `K6-moderate`.
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct MetricsArgs {
    /// Truth CSV (`taxon,community[,genus]`); one, or one per `--fit`.
    #[arg(long, required = true)]
    truth: Vec<PathBuf>,
    /// `fit.json` written by `fit`.
    #[arg(long, required = true)]
    fit: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match &cli.command {
        Command::Network(a) => commands::network(a),
        Command::Fit(a) => commands::fit(a),
        Command::SelectK(a) => commands::select_k(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Metrics(a) => commands::metrics(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let usage = e.downcast_ref::<sbm_mrf::Error>().is_some_and(sbm_mrf::Error::is_usage);
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
