//! `edit-embed`: train string embeddings that approximate edit distance,
//! embed corpora, and run evaluation, threshold search, similarity join,
//! and the property suites — all seeded and reproducible.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod cmd_embed;
mod cmd_eval;
mod cmd_join;
mod cmd_props;
mod cmd_search;
mod cmd_train;
mod common;

#[derive(Parser)]
#[command(
    name = "edit-embed",
    version,
    about = "Approximate edit distance with learned string embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a corpus and train the embedding model
    Train(TrainArgs),
    /// Embed every corpus string into an embedding store
    Embed(EmbedArgs),
    /// Report estimation error and recall-item curves for a store
    Eval(EvalArgs),
    /// Threshold search for every held-out query against the base split
    Search(SearchArgs),
    /// Self-similarity join over the whole corpus
    Join(JoinArgs),
    /// Run the bound, gradient, and distortion property suites
    Props(PropsArgs),
}

impl Command {
    fn threads(&self) -> Option<usize> {
        match self {
            Command::Train(a) => a.threads,
            Command::Embed(a) => a.threads,
            Command::Eval(a) => a.threads,
            Command::Search(a) => a.threads,
            Command::Join(a) => a.threads,
            Command::Props(a) => a.threads,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Corpus file: one string per line
    #[arg(long)]
    data: PathBuf,
    /// Truncate each line to this many bytes after reading
    #[arg(long)]
    truncate_at: Option<usize>,
    /// Reject raw lines longer than this many bytes
    #[arg(long, default_value_t = 65_536)]
    max_line_bytes: usize,
}

#[derive(Args)]
struct SplitArgs {
    /// Strings drawn into the training split
    #[arg(long, default_value_t = 1_000)]
    train_size: usize,
    /// Strings drawn as queries; everything else becomes the base
    #[arg(long, default_value_t = 1_000)]
    query_size: usize,
}

#[derive(Args)]
struct ModelShapeArgs {
    /// Convolution layers
    #[arg(long, default_value_t = 10)]
    layers: usize,
    /// Kernels per convolution layer
    #[arg(long, default_value_t = 8)]
    kernels: usize,
    /// Embedding dimension
    #[arg(long, default_value_t = 128)]
    dim: usize,
    /// Pooling applied after each convolution
    #[arg(long, value_enum, default_value_t = PoolOpt::Max)]
    pool: PoolOpt,
    /// Activation between convolution and pooling
    #[arg(long, value_enum, default_value_t = ActOpt::Relu)]
    activation: ActOpt,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PoolOpt {
    Max,
    Avg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ActOpt {
    Relu,
    None,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodOpt {
    /// Trained model read from the run directory's checkpoint
    Cnn,
    /// Freshly initialized, untrained model
    RandomCnn,
    /// Randomized CGK walk into Hamming space
    Cgk,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeOpt {
    /// Verify every row within mu * tau in embedding space
    Filter,
    /// Verify the T embedding-nearest rows
    Ranked,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    shape: ModelShapeArgs,
    /// Seed for the split, the weights, and the triplet sampler
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training epochs
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Weight of the distance-approximation loss term
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// SGD learning rate
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Triplets per mini-batch
    #[arg(long, default_value_t = 64)]
    batch: usize,
    /// Neighbor-pool size for triplet sampling
    #[arg(long, default_value_t = 100)]
    topk: usize,
    /// Run directory for the checkpoint, loss trace, and split manifest
    #[arg(long)]
    out: PathBuf,
    /// Cap the worker thread pool
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model-shape flags for `--method random-cnn`
    #[command(flatten)]
    shape: ModelShapeArgs,
    /// Embedding to compute
    #[arg(long, value_enum, default_value_t = MethodOpt::Cnn)]
    method: MethodOpt,
    /// Seed for the CGK matrix or the untrained model weights
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run directory: reads model.cned for `--method cnn`, writes
    /// embeddings.cemb
    #[arg(long)]
    out: PathBuf,
    /// Cap the worker thread pool
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Split seed; must match the seed the store's run used
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Method that produced the store (chooses the distance metric)
    #[arg(long, value_enum, default_value_t = MethodOpt::Cnn)]
    method: MethodOpt,
    /// Run directory holding embeddings.cemb
    #[arg(long)]
    out: PathBuf,
    /// Cap the worker thread pool
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    /// Split seed; must match the seed the store's run used
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Method that produced the store (chooses the distance metric)
    #[arg(long, value_enum, default_value_t = MethodOpt::Cnn)]
    method: MethodOpt,
    /// Edit-distance threshold
    #[arg(long)]
    tau: usize,
    /// Embedding-space blow-up factor; must exceed 1
    #[arg(long, default_value_t = f64::INFINITY)]
    mu: f64,
    /// Candidate generation strategy
    #[arg(long, value_enum, default_value_t = ModeOpt::Filter)]
    mode: ModeOpt,
    /// Candidates verified per query in ranked mode
    #[arg(long = "T", default_value_t = 100)]
    t: usize,
    /// Run directory holding embeddings.cemb
    #[arg(long)]
    out: PathBuf,
    /// Cap the worker thread pool
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct JoinArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Method that produced the store (chooses the distance metric)
    #[arg(long, value_enum, default_value_t = MethodOpt::Cnn)]
    method: MethodOpt,
    /// Edit-distance threshold
    #[arg(long)]
    tau: usize,
    /// Embedding-space blow-up factor; must exceed 1
    #[arg(long, default_value_t = f64::INFINITY)]
    mu: f64,
    /// Run directory holding embeddings.cemb
    #[arg(long)]
    out: PathBuf,
    /// Cap the worker thread pool
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct PropsArgs {
    /// Random pairs per bound suite
    #[arg(long, default_value_t = 10_000)]
    pairs: usize,
    /// Seed for every suite's generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional directory for the machine-readable report
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap the worker thread pool
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.command.threads() {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Train(args) => cmd_train::run(args),
        Command::Embed(args) => cmd_embed::run(args),
        Command::Eval(args) => cmd_eval::run(args),
        Command::Search(args) => cmd_search::run(args),
        Command::Join(args) => cmd_join::run(args),
        Command::Props(args) => cmd_props::run(args),
    }
}
