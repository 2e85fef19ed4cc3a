//! Per-frame facial temporal-expressiveness (TED) scoring.
//!
//! A TED score combines a static term, the exponentially weighted intensities
//! of a profile of facial action units, with a multiplicative dynamics term
//! built from how landmarks, head pose, gaze and AU intensities change from
//! frame to frame. On top of the scores the crate provides correlation
//! analysis against frame-level pain labels, label-grouped summaries and a
//! random-forest pain classifier whose confidence can be audited against the
//! scores.

pub mod analytics;
pub mod engine;
pub mod ingestion;
pub mod interpret;
pub mod model;

pub use engine::{score_dataset, score_sequence, DatasetScores, EngineError};
pub use model::{
    AuProfile, AuSource, FeatureSet, FrameFeatures, ScoredFrame, SequenceKey, SequenceRecord,
    TedConfig, WindowOrientation,
};
