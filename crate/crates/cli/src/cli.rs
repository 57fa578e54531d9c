use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "qclp", version, about = "Temporal concept link prediction pipeline")]
pub struct Cli {
    /// TOML file whose keys become flags; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Master seed. Component seeds are derived from it by stable hashing.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract concept co-occurrences from a JSON-lines corpus.
    #[command(args_override_self = true)]
    Ingest(IngestArgs),
    /// Chronological train/val/test split with sampled negatives.
    #[command(args_override_self = true)]
    Split(SplitArgs),
    /// Build node features.
    #[command(args_override_self = true)]
    Featurize(FeaturizeArgs),
    /// Combine several feature files into one.
    #[command(args_override_self = true)]
    Merge(MergeArgs),
    /// Train every (arch, features, seed) cell and write metrics and reports.
    #[command(name = "train-eval", args_override_self = true)]
    TrainEval(TrainEvalArgs),
    /// Rebuild report tables from the metrics files of a run directory.
    #[command(args_override_self = true)]
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// JSON-lines corpus with id, year, title and abstract fields.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Concept vocabulary, one concept per line.
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub min_year: Option<i32>,
    #[arg(long)]
    pub max_year: Option<i32>,
    /// Number of most frequent concepts listed in the stats.
    #[arg(long, default_value_t = 20)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Co-occurrence TSV written by `ingest`.
    #[arg(long)]
    pub edges: PathBuf,
    /// Vocabulary; its size is the node count.
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub train_end: i32,
    #[arg(long)]
    pub val_end: i32,
    #[arg(long)]
    pub test_end: i32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureMethod {
    Deepwalk,
    Line,
    Node2vec,
    Llm,
    Timedecay,
}

#[derive(Debug, Clone, Args)]
pub struct LlmArgs {
    /// Generator model id.
    #[arg(long)]
    pub model: Option<String>,
    /// Embedding model id.
    #[arg(long)]
    pub embed_model: Option<String>,
    /// Chat-completion endpoint URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Embedding endpoint URL; defaults to --endpoint.
    #[arg(long)]
    pub embed_endpoint: Option<String>,
    #[arg(long, default_value_t = 512)]
    pub max_tokens: usize,
    /// Cache directory; defaults to $QCLP_CACHE_DIR, then `.qclp-cache`.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Serve every call from the cache; a miss is an error.
    #[arg(long)]
    pub fixtures_only: bool,
    #[arg(long, default_value_t = 60)]
    pub timeout: u64,
    #[arg(long, default_value_t = 5)]
    pub max_retries: u32,
    /// Requests per second per client.
    #[arg(long, default_value_t = 2.0)]
    pub rate_limit: f64,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long, value_enum)]
    pub method: FeatureMethod,
    /// Split directory; graph methods train on its training edges only.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Co-occurrence TSV (timedecay).
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Vocabulary (llm).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Output file; `.bin` selects the binary format, anything else TSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 768)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long, default_value_t = 10)]
    pub num_walks: usize,
    #[arg(long, default_value_t = 80)]
    pub walk_len: usize,
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub neg_k: usize,
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    /// Decay constant per year (timedecay).
    #[arg(long, default_value_t = 0.3)]
    pub lambda: f64,
    /// Time-decay embedding dimension.
    #[arg(long, default_value_t = 64)]
    pub td_dim: usize,
    /// PPMI context smoothing exponent; 1 disables it.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Features the time-decay block is appended to. Required for timedecay.
    #[arg(long)]
    pub concat_with: Option<PathBuf>,
    /// L2-normalize rows before writing.
    #[arg(long)]
    pub normalize: bool,
    #[command(flatten)]
    pub llm: LlmArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MergeKind {
    Mean,
    Max,
    Summarize,
    Select,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long, value_enum)]
    pub method: MergeKind,
    /// Inputs as `name=path` (mean, max, select); name is the model id.
    #[arg(long = "inputs", value_delimiter = ',')]
    pub inputs: Vec<String>,
    /// Generator model ids whose answers are summarized (summarize).
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// One model id per concept line, chosen by an external selector (select).
    #[arg(long)]
    pub choices: Option<PathBuf>,
    /// Vocabulary (summarize).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 768)]
    pub dim: usize,
    #[command(flatten)]
    pub llm: LlmArgs,
}

#[derive(Debug, Args)]
pub struct TrainEvalArgs {
    #[arg(long)]
    pub split: PathBuf,
    /// Feature files as `name=path`; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', required = true)]
    pub features: Vec<String>,
    /// Architectures to run.
    #[arg(long, value_delimiter = ',', default_value = "mlp,gcn,sage,gae,ncn")]
    pub archs: Vec<String>,
    /// Seeds as a list (`0,1,2`) or half-open range (`0..10`).
    #[arg(long, default_value = "0..10")]
    pub seeds: String,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory written by `train-eval`.
    #[arg(long)]
    pub run: PathBuf,
    /// Directory for report files; defaults to the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
