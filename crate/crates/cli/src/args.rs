use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use attblstm::Variant;

#[derive(Debug, Parser)]
#[command(name = "attblstm", version, about = "Attention-based BLSTM text classification toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model on a 56/24/20 split and write a checkpoint plus loss curve
    Train(TrainArgs),
    /// Repeated k-fold comparison of neural variants and baselines with Wilcoxon tests
    Compare(CompareArgs),
    /// Train and evaluate once per value of an epochs or dimension axis
    Sweep(SweepArgs),
    /// Export attention explanations from a checkpoint
    Explain(ExplainArgs),
    /// Write a synthetic labeled corpus as JSON Lines
    Synth(SynthArgs),
    /// Class counts and keyword/slang occurrence counts of a corpus
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// JSON Lines corpus with id, text and label fields
    #[arg(long)]
    pub corpus: PathBuf,
    /// Replacement stop-word list, one word per line
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// JSON file with model configuration; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Pretrained vectors in token-plus-floats text format; `{dim}` expands to the dimension
    #[arg(long)]
    pub embeddings: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub no_attention: bool,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    M1,
    M2,
    M3,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::M1 => Variant::M1,
            VariantArg::M2 => Variant::M2,
            VariantArg::M3 => Variant::M3,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Neural models such as att-m1,blstm-m1 or `all` for the six variants
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Baselines among logreg, nb, svm
    #[arg(long, value_delimiter = ',')]
    pub baselines: Vec<String>,
    #[arg(long, default_value_t = attblstm::evalstat::DEFAULT_FOLDS)]
    pub k: usize,
    #[arg(long, default_value_t = attblstm::evalstat::DEFAULT_REPEATS)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Epochs,
    Dimension,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub axis: Axis,
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = attblstm::explain::DEFAULT_TOP_K)]
    pub top_k: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 400)]
    pub n_posts: usize,
    #[arg(long, default_value_t = 0.9)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long)]
    pub positive_rate: Option<f64>,
    #[arg(long)]
    pub min_len: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output JSON Lines file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Also write the statistics to this JSON file
    #[arg(long)]
    pub out: Option<PathBuf>,
}
