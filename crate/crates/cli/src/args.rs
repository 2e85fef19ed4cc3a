use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "ted", version, about = "Per-frame facial temporal-expressiveness (TED) scores and analyses")]
pub struct Cli {
    /// Worker threads (0 uses every available core). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every frame; writes scores.csv.
    Score(ScoreArgs),
    /// Correlate TED with PSPI per subject across window lengths; writes ablation.*.
    Sweep(SweepArgs),
    /// Correlate TED with PSPI per subject at one window length; writes evaluation.*.
    Evaluate(EvaluateArgs),
    /// Describe TED scores grouped by sequence label and gender; writes summary.*.
    Summarize(SummarizeArgs),
    /// Train and validate a pain classifier and audit it against TED; writes interpret.*.
    Interpret(InterpretArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Trailing,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AuSourceArg {
    Manual,
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ScaleArg {
    #[value(name = "VAS", alias = "vas")]
    Vas,
    #[value(name = "OPI", alias = "opi")]
    Opi,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Dataset manifest (JSON); relative paths inside resolve against its directory.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Output directory.
    #[serde(skip)]
    #[arg(long, env = "TED_OUTPUT_DIR", default_value = "ted-output")]
    pub out: PathBuf,

    /// JSON column mapping for the feature CSVs (default: toolkit export names).
    #[arg(long)]
    pub schema: Option<PathBuf>,

    /// Report format written next to the JSON report.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TedArgs {
    /// Moving-average window length in frames.
    #[arg(long = "w", default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub window: u32,

    /// Whether the window ends at (trailing) or starts at (forward) the current frame.
    #[arg(long, value_enum, default_value_t = Orientation::Trailing)]
    pub orientation: Orientation,

    /// AU profile: pain, pain-predicted, happy or overall.
    #[arg(long, default_value = "pain")]
    pub profile: String,

    /// Take AU intensities from manual coding files or from the tracker export.
    #[arg(long, value_enum, default_value_t = AuSourceArg::Manual)]
    pub au_source: AuSourceArg,

    /// Enabled feature sets.
    #[arg(long, value_delimiter = ',', default_value = "L,Ho,Hr,Gl,Gr,I")]
    pub feature_sets: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub ted: TedArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub ted: TedArgs,

    /// Window lengths to evaluate (overrides --w).
    #[arg(long, value_delimiter = ',', default_value = "3,5,10,20,40,60,75",
          value_parser = clap::value_parser!(u32).range(1..))]
    pub windows: Vec<u32>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub ted: TedArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub ted: TedArgs,

    /// Sequence label to group by.
    #[arg(long, value_enum, default_value_t = ScaleArg::Vas)]
    pub scale: ScaleArg,

    /// Summarize the natural log of the scores.
    #[arg(long, default_value_t = false)]
    pub log: bool,

    /// Also write summary_plot.csv (one box-plot row per group).
    #[arg(long, default_value_t = false)]
    pub plot_data: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InterpretArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub ted: TedArgs,

    /// Random seed for the forest.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub n_trees: u32,

    /// Maximum tree depth (unlimited when omitted).
    #[arg(long)]
    pub max_depth: Option<u32>,

    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub min_samples_leaf: u32,

    /// A frame is labeled pain when its PSPI exceeds this.
    #[arg(long, default_value_t = 0.0)]
    pub pspi_threshold: f64,

    /// Draw half of every bootstrap sample from each class.
    #[arg(long, default_value_t = false)]
    pub balanced_bootstrap: bool,

    /// TED score at or above which a frame counts as expressive.
    #[arg(long, default_value_t = 100.0)]
    pub high_ted: f64,

    /// Pain confidence at or below which the classifier says "no pain".
    #[arg(long, default_value_t = 0.1)]
    pub low_confidence: f64,

    /// TED score at or below which a frame counts as inexpressive.
    #[arg(long, default_value_t = 6.0)]
    pub low_ted: f64,

    /// Pain confidence at or above which the classifier says "pain".
    #[arg(long, default_value_t = 0.9)]
    pub high_confidence: f64,

    /// Audit these predictions (subject,sequence,frame,confidence_pain,predicted) instead of training.
    #[arg(long, conflicts_with = "model_in")]
    pub predictions: Option<PathBuf>,

    /// Apply a saved model to every frame instead of leave-one-subject-out validation.
    #[arg(long)]
    pub model_in: Option<PathBuf>,

    /// Also train one forest on all frames and save it here.
    #[serde(skip)]
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}
