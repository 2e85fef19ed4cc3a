//! Frame scoring.
//!
//! For every frame the engine computes a static score `S` from the profile AU
//! intensities and, per feature set, the signed relative change `P` against
//! the previous frame. `P` is averaged over a window of `w` frames into `M`,
//! and the frame's score is
//!
//! ```text
//! ted = S * (1 + M_L * M_Ho * M_Hr * M_Gl * M_Gr * M_I)
//! ```
//!
//! The first frame of a sequence is the reference frame: it has no
//! predecessor, all of its `M` are 0 and its score equals `S`.
//!
//! Frames whose tracking failed keep their index but take their tracked
//! features (and, for predicted AUs, their AU levels) from the closest
//! preceding valid frame, or from the first valid frame when no valid frame
//! precedes them. Their relative change is therefore 0.

mod dynamics;
mod output;

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

pub use dynamics::{direction_sign, relative_change, static_score, DynamicsState, MovingWindow};
pub use output::{read_scores_csv, write_scores_csv, ReadScoresError, ScoreRow, SCORES_HEADER};

use crate::model::{
    validate_sequence, AuSource, ConfigError, FeatureSet, Finding, FrameFeatures, PerFeature,
    ScoredFrame, SequenceKey, SequenceRecord, TedConfig, WindowOrientation,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("AU{au} level {level} outside [0, 5]")]
    Domain { au: u8, level: f64 },
    #[error("vector length mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("feature vector of length {len} has no sample variance (need at least 2 components)")]
    Degenerate { len: usize },
    #[error("profile AU{au} missing from frame")]
    MissingAu { au: u8 },
    #[error("sequence fails validation: {}", findings.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidSequence { findings: Vec<Finding> },
    #[error("frame {frame}, feature set {feature_set}: {source}")]
    AtFrame {
        frame: u32,
        feature_set: String,
        #[source]
        source: Box<EngineError>,
    },
}

impl EngineError {
    fn at(self, frame: u32, feature_set: &str) -> Self {
        EngineError::AtFrame {
            frame,
            feature_set: feature_set.to_string(),
            source: Box::new(self),
        }
    }
}

/// Flattens one frame into the per-feature-set vectors that enter the
/// relative-change and direction computations.
fn feature_vectors(
    tracked: &FrameFeatures,
    au_levels: &[f64],
) -> PerFeature<Vec<f64>> {
    PerFeature([
        tracked.landmarks.iter().flat_map(|p| p.iter().copied()).collect(),
        tracked.head_translation.to_vec(),
        tracked.head_rotation.to_vec(),
        tracked.gaze_left.to_vec(),
        tracked.gaze_right.to_vec(),
        au_levels.to_vec(),
    ])
}

/// For each frame, the index of the frame whose tracked features stand in
/// for it.
fn tracked_sources(frames: &[FrameFeatures]) -> Vec<usize> {
    let first_ok = frames.iter().position(|f| f.tracking_ok);
    let mut last_ok = None;
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if f.tracking_ok {
                last_ok = Some(i);
                i
            } else {
                last_ok.or(first_ok).unwrap_or(i)
            }
        })
        .collect()
}

struct FrameTerms {
    static_score: f64,
    relative_change: PerFeature<f64>,
    direction: PerFeature<i8>,
    /// `None` on the reference frame.
    product: Option<PerFeature<f64>>,
}

fn frame_terms(seq: &SequenceRecord, cfg: &TedConfig) -> Result<Vec<FrameTerms>, EngineError> {
    let sources = tracked_sources(&seq.frames);
    let mut previous: Option<PerFeature<Vec<f64>>> = None;
    let mut terms = Vec::with_capacity(seq.frames.len());

    for (i, frame) in seq.frames.iter().enumerate() {
        let tracked = &seq.frames[sources[i]];
        let au_frame = match cfg.au_source {
            AuSource::Manual => frame,
            AuSource::Predicted => tracked,
        };
        let au_levels = cfg
            .profile
            .au_ids
            .iter()
            .map(|&au| {
                au_frame
                    .au_intensities
                    .get(&au)
                    .copied()
                    .ok_or_else(|| EngineError::MissingAu { au }.at(frame.frame_index, "I"))
            })
            .collect::<Result<Vec<f64>, EngineError>>()?;
        let s = static_score(&au_levels, &cfg.profile).map_err(|e| e.at(frame.frame_index, "I"))?;
        let vectors = feature_vectors(tracked, &au_levels);

        let mut relative = PerFeature::splat(0.0);
        let mut direction = PerFeature::splat(1i8);
        let product = match &previous {
            None => None,
            Some(prev) => {
                let mut product = PerFeature::splat(0.0);
                for fs in FeatureSet::ALL.into_iter().filter(|&fs| cfg.is_enabled(fs)) {
                    let at = |e: EngineError| e.at(frame.frame_index, fs.name());
                    let c = relative_change(&prev[fs], &vectors[fs]).map_err(at)?;
                    let d = direction_sign(&prev[fs], &vectors[fs]).map_err(at)?;
                    relative[fs] = c;
                    direction[fs] = d;
                    product[fs] = f64::from(d) * c;
                }
                Some(product)
            }
        };
        terms.push(FrameTerms {
            static_score: s,
            relative_change: relative,
            direction,
            product,
        });
        previous = Some(vectors);
    }
    Ok(terms)
}

/// Windowed means of the products, per frame.
fn windowed_dynamics(terms: &[FrameTerms], cfg: &TedConfig) -> Vec<PerFeature<f64>> {
    match cfg.window_orientation {
        WindowOrientation::Trailing => {
            let mut state = DynamicsState::new(cfg.window);
            terms
                .iter()
                .map(|t| {
                    let mut m = PerFeature::splat(0.0);
                    if let Some(p) = &t.product {
                        for fs in FeatureSet::ALL {
                            m[fs] = state.push_product(fs, p[fs]);
                        }
                    }
                    m
                })
                .collect()
        }
        WindowOrientation::Forward => (0..terms.len())
            .map(|i| {
                let mut m = PerFeature::splat(0.0);
                if terms[i].product.is_none() {
                    return m;
                }
                let end = (i + cfg.window).min(terms.len());
                let ahead = &terms[i..end];
                for fs in FeatureSet::ALL {
                    let sum: f64 = ahead.iter().filter_map(|t| t.product.map(|p| p[fs])).sum();
                    m[fs] = sum / ahead.len() as f64;
                }
                m
            })
            .collect(),
    }
}

/// Scores every frame of one sequence. Output has one entry per input frame,
/// in order.
pub fn score_sequence(seq: &SequenceRecord, cfg: &TedConfig) -> Result<Vec<ScoredFrame>, EngineError> {
    cfg.validate()?;
    let terms = frame_terms(seq, cfg)?;
    let dynamics = windowed_dynamics(&terms, cfg);

    Ok(seq
        .frames
        .iter()
        .zip(terms)
        .zip(dynamics)
        .map(|((frame, t), m)| {
            let mut factors = PerFeature::splat(1.0);
            let mut product = 1.0;
            for fs in FeatureSet::ALL.into_iter().filter(|&fs| cfg.is_enabled(fs)) {
                factors[fs] = m[fs];
                product *= m[fs];
            }
            ScoredFrame {
                frame_index: frame.frame_index,
                static_score: t.static_score,
                dynamics: factors,
                relative_change: t.relative_change,
                direction: t.direction,
                ted_score: t.static_score * (1.0 + product),
                tracking_ok: frame.tracking_ok,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceError {
    pub key: SequenceKey,
    pub error: EngineError,
}

/// Scores for a whole dataset, keyed and ordered by (subject, sequence).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetScores {
    pub results: BTreeMap<SequenceKey, Vec<ScoredFrame>>,
    pub errors: Vec<SequenceError>,
}

/// Validates and scores each record independently (in parallel on the
/// current rayon pool). Failures are collected per sequence.
pub fn score_dataset(records: &[SequenceRecord], cfg: &TedConfig) -> DatasetScores {
    let outcomes: Vec<(SequenceKey, Result<Vec<ScoredFrame>, EngineError>)> = records
        .par_iter()
        .map(|record| {
            let findings = validate_sequence(record);
            let result = if findings.is_empty() {
                score_sequence(record, cfg)
            } else {
                Err(EngineError::InvalidSequence { findings })
            };
            (record.key(), result)
        })
        .collect();

    let mut scores = DatasetScores::default();
    for (key, outcome) in outcomes {
        match outcome {
            Ok(frames) => {
                scores.results.insert(key, frames);
            }
            Err(error) => scores.errors.push(SequenceError { key, error }),
        }
    }
    scores.errors.sort_by(|a, b| a.key.cmp(&b.key));
    scores
}
