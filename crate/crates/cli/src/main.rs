//! `ggad`: train a generalist anomaly detector on labeled graphs and score
//! unseen graphs with it.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration, 3 for
//! numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "ggad", version, about = "Zero-shot graph anomaly detection")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug). Default: warnings only.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train on labeled source graphs and write a model artifact.
    Train(TrainArgs),
    /// Score a target graph with a trained artifact.
    Infer(InferArgs),
    /// Report drift (ND, SD, AD) between an artifact's sources and a target.
    Metrics(MetricsArgs),
    /// Generate a synthetic domain with injected anomalies.
    Synth(SynthArgs),
    /// Inject clique and attribute anomalies into an existing graph.
    Inject(InjectArgs),
    /// AUROC and AUPRC of a score file against a labels file.
    Eval(EvalArgs),
    /// Run adapter ablations over several targets and seeds.
    Ablate(AblateArgs),
    /// Full-pipeline metrics for several vote thresholds.
    SweepK(SweepKArgs),
}

#[derive(Args, Debug)]
#[command(after_help = commands::train_defaults_help())]
pub struct TrainArgs {
    /// Source graph directories (edges.tsv, features.csv, labels.csv).
    #[arg(long, required = true, num_args = 1..)]
    pub sources: Vec<PathBuf>,
    /// JSON training config; omitted keys take the defaults listed below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override `epochs`.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Override `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override `optimizer.learning_rate`.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Artifact path.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-epoch losses as CSV (epoch,loss,loss_high,loss_low).
    #[arg(long)]
    pub history: Option<PathBuf>,
}

/// Inference settings shared by every command that runs the full pipeline.
#[derive(Args, Debug, Clone)]
pub struct InferOverrides {
    /// JSON inference config; omitted keys take the defaults listed below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override `anomaly_ratio` (fraction pseudo-labeled per channel).
    #[arg(long)]
    pub anomaly_ratio: Option<f64>,
    /// Override `k_vote` (votes needed for a pseudo-positive, 1 to 3).
    #[arg(long)]
    pub k_vote: Option<usize>,
    /// Override `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
#[command(after_help = commands::infer_defaults_help())]
pub struct InferArgs {
    #[arg(long)]
    pub artifact: PathBuf,
    /// Target graph directory; labels.csv, if present, is ignored.
    #[arg(long)]
    pub target: PathBuf,
    #[command(flatten)]
    pub settings: InferOverrides,
    /// Score CSV (node_id,rs,as,s_ad,final).
    #[arg(long)]
    pub out: PathBuf,
    /// Report JSON. Default: the score path with extension `report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[arg(long)]
    pub artifact: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Seed for projection and reference sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// JSON domain spec (num_nodes, num_blocks, intra_block_edge_prob,
    /// inter_block_edge_prob, feature_dim, feature_domain_shift {scale,
    /// rotation}, anomaly_ratio, seed). All keys are required.
    #[arg(long)]
    pub spec: PathBuf,
    /// Output graph directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InjectArgs {
    /// Input graph directory.
    #[arg(long)]
    pub graph: PathBuf,
    /// Output graph directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of cliques to plant.
    #[arg(long, default_value_t = 0)]
    pub cliques: usize,
    /// Members per clique.
    #[arg(long, default_value_t = 10)]
    pub clique_size: usize,
    /// Number of attribute anomalies.
    #[arg(long, default_value_t = 0)]
    pub attributes: usize,
    /// Candidates examined per attribute anomaly.
    #[arg(long, default_value_t = 50)]
    pub candidate_pool: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Score CSV with a header row.
    #[arg(long)]
    pub scores: PathBuf,
    /// Labels file, one 0 or 1 per line in node order.
    #[arg(long)]
    pub labels: PathBuf,
    /// Score column to evaluate.
    #[arg(long, default_value = "final")]
    pub column: String,
}

#[derive(Args, Debug)]
#[command(after_help = commands::infer_defaults_help())]
pub struct AblateArgs {
    #[arg(long)]
    pub artifact: PathBuf,
    /// Labeled target directories (labels are used for metrics only).
    #[arg(long, required = true, num_args = 1..)]
    pub targets: Vec<PathBuf>,
    /// Comma-separated variants: full, no_ada_tsa, ada_only, tsa_only.
    #[arg(long, value_delimiter = ',', default_value = "full,no_ada_tsa,ada_only,tsa_only")]
    pub variants: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub settings: InferOverrides,
    /// Per-run CSV (dataset,variant,seed,auroc,auprc,runtime_ms).
    #[arg(long)]
    pub out: PathBuf,
    /// Summary JSON with per-variant means and standard deviations.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(after_help = commands::infer_defaults_help())]
pub struct SweepKArgs {
    #[arg(long)]
    pub artifact: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub k_values: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub settings: InferOverrides,
    /// CSV (k_vote,seed,auroc,auprc,voted_positives).
    #[arg(long)]
    pub out: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<ggad::Error>())
        .any(ggad::Error::is_numerical);
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Infer(a) => commands::infer(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Synth(a) => commands::synth(a),
        Command::Inject(a) => commands::inject(a),
        Command::Eval(a) => commands::eval(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::SweepK(a) => commands::sweep_k(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
