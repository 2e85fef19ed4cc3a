//! Correlation of TED scores with frame-level pain labels (per subject, across
//! window lengths) and label-grouped descriptive summaries.

mod correlation;
mod evaluation;
mod stats;
mod summary;

use thiserror::Error;

pub use correlation::{pcc_p_value, pearson};
pub use evaluation::{
    evaluate_dataset, evaluate_scores, evaluate_subject, render_ablation_text, render_eval_text,
    subject_series, window_ablation, write_correlations_csv, AblationReport, EvalReport,
    SkippedSubject, SubjectCorrelation,
};
pub use stats::{quantile, Distribution};
pub use summary::{
    render_summary_text, summarize, write_summary_csv, GroupStats, Scale, SummaryReport, Transform,
};

use crate::engine::EngineError;
use crate::model::ConfigError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("series lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("correlation needs at least 3 points, got {n}")]
    TooFewPoints { n: usize },
    #[error("correlation is undefined for a constant series")]
    UndefinedCorrelation,
    #[error("p-value needs at least 3 points (1 degree of freedom), got {n}")]
    DegreesOfFreedom { n: usize },
    #[error("correlation coefficient {r} outside [-1, 1]")]
    CoefficientRange { r: f64 },
    #[error("no window lengths requested")]
    NoWindows,
    #[error("sequence {sequence} has no PSPI labels")]
    MissingPspi { sequence: String },
    #[error("sequence {sequence} has no {scale} label")]
    MissingLabel { sequence: String, scale: String },
    #[error("sequence {sequence} has no scores")]
    MissingScores { sequence: String },
    #[error("sequence {sequence}: {scores} scored frames but {pspi} PSPI values")]
    Misaligned { sequence: String, scores: usize, pspi: usize },
    #[error("sequence {sequence}, frame {frame}: cannot take the log of TED score {score}")]
    NonPositiveScore { sequence: String, frame: u32, score: f64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("sequence {sequence}: {source}")]
    Scoring {
        sequence: String,
        #[source]
        source: EngineError,
    },
}
