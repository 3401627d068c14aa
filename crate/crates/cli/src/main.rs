//! `gnnlab` — generate synthetic graph datasets, train GNN classifiers on
//! them, sweep hyperparameter grids, and summarize the results.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod report;
mod results;

#[derive(Parser)]
#[command(name = "gnnlab", version, about = "Synthetic graph classification lab")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labeled dataset of synthetic graphs and write it to disk.
    Generate(GenerateArgs),
    /// Print per-class structure statistics for a stored dataset.
    Stats(StatsArgs),
    /// Train one model configuration (several replications) and record results.
    Train(TrainArgs),
    /// Run a full architecture x feature x width grid, resumably.
    Grid(GridArgs),
    /// Summarize a results file into series CSVs and a min-width table.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Base preset to start from: small (train/val/test) or medium (all test).
    #[arg(long)]
    pub preset: Option<String>,
    /// Graphs per class (overrides preset).
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Node count range, inclusive (overrides preset).
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    pub n_range: Option<Vec<usize>>,
    /// Split ratios train val test (overrides preset).
    #[arg(long, num_args = 3, value_names = ["TRAIN", "VAL", "TEST"])]
    pub ratios: Option<Vec<f64>>,
    /// Master seed (overrides preset default 7).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path for the dataset file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct StatsArgs {
    /// Dataset file to summarize.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Also write the table as CSV to this path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Skip average path length (it is the slow column).
    #[arg(long)]
    pub no_paths: bool,
}

#[derive(Args)]
pub struct TrainArgs {
    /// key=value config file; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training dataset file.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Optional second dataset scored in full as a size-generalization probe.
    #[arg(long)]
    pub medium: Option<PathBuf>,
    /// Results CSV to append to (resumes past completed runs).
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Architecture: gin, gatv2, hierarchical, global.
    #[arg(long)]
    pub arch: Option<gnnlab_core::model::Arch>,
    /// Node feature: ones, noise, degree, normdegree, identity.
    #[arg(long)]
    pub feature: Option<String>,
    /// Hidden width H.
    #[arg(long)]
    pub h: Option<usize>,
    /// Number of message-passing layers K.
    #[arg(long)]
    pub k: Option<usize>,
    /// Pooling keep ratio for the pooled architectures.
    #[arg(long)]
    pub r: Option<f64>,
    /// Identity feature length k.
    #[arg(long)]
    pub identity_k: Option<usize>,
    /// Dropout probability in the classifier head.
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Independent seeded replications of this configuration.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Base seed; replication i trains with a seed derived from (seed, i).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model selection: best-val or last-epoch.
    #[arg(long)]
    pub selection: Option<String>,
}

#[derive(Args)]
pub struct GridArgs {
    /// key=value config file; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Optional second dataset scored in full by every run.
    #[arg(long)]
    pub medium: Option<PathBuf>,
    /// Results CSV to append to (the grid resumes from it).
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Directory for series CSVs and the summary table.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Comma-separated architectures (default: all four).
    #[arg(long)]
    pub archs: Option<String>,
    /// Comma-separated features (default: all five).
    #[arg(long)]
    pub features: Option<String>,
    /// Comma-separated hidden widths (default: 1,2,3,8,16,32).
    #[arg(long)]
    pub h_values: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub identity_k: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Parallel training workers (or set GNNLAB_WORKERS; default 1).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Results CSV to summarize.
    #[arg(long)]
    pub results: PathBuf,
    /// Directory for series CSVs and the summary table.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.cmd {
        Cmd::Generate(args) => commands::cmd_generate(args),
        Cmd::Stats(args) => commands::cmd_stats(args),
        Cmd::Train(args) => commands::cmd_train(args),
        Cmd::Grid(args) => commands::cmd_grid(args),
        Cmd::Report(args) => commands::cmd_report(args),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
