use std::path::PathBuf;

use baitscore::baseline::Loss;
use baitscore::cues::Normalization;
use baitscore::model::{Branch, MissingImage};
use baitscore::text::DocumentSource;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "baitscore", version, about = "Clickbait scoring for social-media posts", args_override_self = true)]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Flat `key = value` file of flags; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the resolved flags of this run as a config file.
    #[arg(long, global = true)]
    pub save_config: Option<PathBuf>,
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Validate a corpus and report class statistics.
    Ingest(IngestArgs),
    /// Train a fusion network.
    Train(TrainArgs),
    /// Score posts with a trained network or baseline.
    Predict(PredictArgs),
    /// Pseudo-label unlabelled posts and merge them with labelled data.
    Selftrain(SelftrainArgs),
    /// Compare predictions with truth scores.
    Evaluate(EvaluateArgs),
    /// Train the tf-idf + boosted stump baseline.
    Baseline(BaselineArgs),
    /// Object-category proportions by class and by score.
    AnalyzeMedia(MediaArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Selftrain(_) => "selftrain",
            Command::Evaluate(_) => "evaluate",
            Command::Baseline(_) => "baseline",
            Command::AnalyzeMedia(_) => "analyze-media",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// {0, 0.3, 0.66, 1}
    Published,
    /// {0, 1/3, 2/3, 1}
    Thirds,
}

impl From<Scale> for baitscore::data::JudgmentScale {
    fn from(s: Scale) -> Self {
        match s {
            Scale::Published => baitscore::data::JudgmentScale::Published,
            Scale::Thirds => baitscore::data::JudgmentScale::Thirds,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Scale::Published)]
    pub scale: Scale,
    /// Print post counts and the class ratio as JSON.
    #[arg(long)]
    pub stats: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value_t = Scale::Published)]
    pub scale: Scale,
    /// Output model directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Text branch: lstm or cnn.
    #[arg(long, default_value = "lstm")]
    pub arch: Branch,
    /// Document for the text branch: tweet, article or both.
    #[arg(long, default_value = "tweet")]
    pub text: DocumentSource,
    /// Fusion inputs: none, or a comma list of cues, cues_tweet, cues_article, image.
    #[arg(long, default_value = "none")]
    pub vectors: String,
    /// Score from the fusion inputs alone.
    #[arg(long)]
    pub no_text: bool,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch_size: u64,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 100)]
    pub seq_length: usize,
    #[arg(long, default_value_t = 10_000)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 200)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 56)]
    pub lstm_units: usize,
    #[arg(long, default_value_t = 32)]
    pub dense_units: usize,
    #[arg(long, default_value_t = 32)]
    pub fusion_units: usize,
    #[arg(long, default_value_t = 32)]
    pub head_units: usize,
    #[arg(long, default_value_t = 64)]
    pub filters_1: usize,
    #[arg(long, default_value_t = 3)]
    pub kernel_1: usize,
    #[arg(long, default_value_t = 64)]
    pub filters_2: usize,
    #[arg(long, default_value_t = 3)]
    pub kernel_2: usize,
    /// Temporal max-pool window for the CNN; a global max-pool when unset.
    #[arg(long)]
    pub pool_size: Option<usize>,
    #[arg(long, default_value_t = baitscore::model::IMAGE_DIM)]
    pub image_dim: usize,
    /// raw_count or per_token.
    #[arg(long, default_value = "per_token")]
    pub cue_normalization: Normalization,
    /// zeros or error.
    #[arg(long, default_value = "zeros")]
    pub missing_image: MissingImage,
    /// Directory of lexicon files; the bundled lexicons when unset.
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
    /// Whitespace-delimited pretrained word vectors.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Image-vector JSON Lines file.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Extra instances whose text also feeds the vocabulary.
    #[arg(long)]
    pub vocab_extra: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Model directory from `train`, or a baseline JSON file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub instances: PathBuf,
    /// Prediction file; standard output when unset.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SelftrainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub unlabelled: PathBuf,
    /// Labelled instances to merge with.
    #[arg(long)]
    pub labelled: PathBuf,
    /// Truth file of the labelled instances.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value_t = Scale::Published)]
    pub scale: Scale,
    /// Output directory for the pseudo labels, merged corpus and report.
    #[arg(long)]
    pub out: PathBuf,
    /// Train a fresh model on the merged corpus for this many epochs.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub retrain_epochs: Option<u64>,
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value_t = Scale::Published)]
    pub scale: Scale,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BaselineArgs {
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value_t = Scale::Published)]
    pub scale: Scale,
    /// Output model file (JSON).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "tweet")]
    pub text: DocumentSource,
    /// Append the five cue values of the document.
    #[arg(long)]
    pub cues: bool,
    #[arg(long, default_value = "per_token")]
    pub cue_normalization: Normalization,
    #[arg(long, default_value_t = baitscore::baseline::DEFAULT_ESTIMATORS as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub estimators: u64,
    /// linear, square or exponential.
    #[arg(long, default_value = "linear")]
    pub loss: Loss,
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
    /// Write the per-round boosting trace as JSON.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MediaArgs {
    /// Object-tag JSON Lines file.
    #[arg(long)]
    pub tags: PathBuf,
    /// Truth file; gives the classes and, without --pred, the trend scores.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Prediction file to bin instead of truth scores.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Scale::Published)]
    pub scale: Scale,
    /// label<TAB>category file; the bundled map when unset.
    #[arg(long)]
    pub category_map: Option<PathBuf>,
    #[arg(long, default_value_t = baitscore::media::DEFAULT_MIN_CONFIDENCE)]
    pub min_confidence: f64,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Trend CSV path; standard output when unset.
    #[arg(long)]
    pub trend_out: Option<PathBuf>,
}
