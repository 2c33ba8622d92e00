use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use feedback_core::corpus::Task;
use feedback_core::eval::Averaging;
use feedback_core::pipeline::ModelKind;
use feedback_core::report::OutputFormat;

#[derive(Debug, Parser)]
#[command(name = "feedback", version, about = "Sentiment and topic classification of student feedback")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Key-value file (`key = value` per line) supplying defaults for any flag of the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled corpus and its annotations.
    Synth(SynthArgs),
    /// Split a corpus into train and test files.
    Split(SplitArgs),
    /// Label distribution by sentence length.
    Stats(StatsArgs),
    /// Train word2vec embeddings on a corpus.
    TrainEmbeddings(EmbeddingArgs),
    /// Train and evaluate one model.
    Run(RunArgs),
    /// Run the full feature/model ablation table.
    Grid(GridArgs),
    /// Classify text with a saved model.
    Predict(PredictArgs),
    /// Classify a feedback file and write semester reports.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub separability: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Comma-separated semester tags assigned in equal shares.
    #[arg(long, default_value = "2015-1,2015-2")]
    pub semesters: String,
    /// Positive,negative,neutral shares.
    #[arg(long, default_value = "49.8,45.8,4.3")]
    pub sentiment_mix: String,
    /// Lecturers,curriculums,facilities,others shares.
    #[arg(long, default_value = "71.7,18.8,4.4,5.0")]
    pub topic_mix: String,
    #[arg(long, value_name = "TSV")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub annotations_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long, value_name = "TSV")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub annotations: Option<PathBuf>,
    /// One lowercase token per line; `#` starts a comment.
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long, default_value_t = 0.8)]
    pub ratio: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_name = "TSV")]
    pub train_out: PathBuf,
    #[arg(long, value_name = "TSV")]
    pub test_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long, default_value = "sentiment")]
    pub task: Task,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Clone)]
pub struct W2vArgs {
    #[arg(long, default_value_t = 300)]
    pub w2v_dim: usize,
    #[arg(long, default_value_t = 5)]
    pub w2v_window: usize,
    #[arg(long, default_value_t = 5)]
    pub w2v_negative: usize,
    #[arg(long, default_value_t = 5)]
    pub w2v_epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub w2v_lr: f64,
    #[arg(long, default_value_t = 1)]
    pub w2v_min_count: usize,
}

#[derive(Debug, Args)]
pub struct EmbeddingArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[command(flatten)]
    pub w2v: W2vArgs,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Comma-separated subset of unigram,bigram,dep,pos (nb/maxent).
    #[arg(long)]
    pub features: Option<String>,
    /// word2vec text file (lstm/bilstm).
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Train embeddings on the training split instead of reading a file.
    #[arg(long)]
    pub train_embeddings: bool,
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Keep only the top-k features by chi-square.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_df: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub maxent_lr: f64,
    #[arg(long, default_value_t = 300)]
    pub maxent_epochs: usize,
    #[arg(long, default_value_t = 10.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub maxent_tol: f64,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.02)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.4)]
    pub dropout: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    #[arg(long, default_value_t = 5.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 0.08)]
    pub init_scale: f64,
    #[arg(long)]
    pub no_peephole: bool,
    /// Update embedding vectors while training the network.
    #[arg(long)]
    pub fine_tune: bool,
    #[command(flatten)]
    pub w2v: W2vArgs,
    /// Averaging used for the table row.
    #[arg(long, default_value = "weighted")]
    pub averaging: Averaging,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long)]
    pub task: Task,
    #[arg(long)]
    pub model: ModelKind,
    #[command(flatten)]
    pub params: ModelArgs,
    /// Directory for model.json, metrics.json and row.txt.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GridTask {
    Sentiment,
    Topic,
    Both,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long, value_enum, default_value_t = GridTask::Both)]
    pub task: GridTask,
    #[command(flatten)]
    pub params: ModelArgs,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long = "model", value_name = "FILE")]
    pub model_path: PathBuf,
    /// Classify this text.
    #[arg(long, conflicts_with = "corpus")]
    pub text: Option<String>,
    /// Classify every record of this TSV file.
    #[arg(long, value_name = "TSV", required_unless_present = "text")]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_name = "TSV")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub annotations: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub sentiment_model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub topic_model: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "json,csv,svg")]
    pub formats: Vec<OutputFormat>,
}
