use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{train_forest, ForestParams};
use super::{FrameKey, InterpretError, Prediction};
use crate::model::SequenceRecord;

/// One classifier sample: a frame's AU intensities and its pain label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub key: FrameKey,
    pub row: Vec<f64>,
    pub pain: bool,
}

/// Pain iff PSPI > `pspi_threshold`, for every frame of every record.
pub fn frame_labels(
    records: &[SequenceRecord],
    pspi_threshold: f64,
) -> Result<BTreeMap<FrameKey, bool>, InterpretError> {
    let mut labels = BTreeMap::new();
    for record in records {
        let pspi = record
            .pspi
            .as_ref()
            .ok_or_else(|| InterpretError::MissingPspi { sequence: record.key().to_string() })?;
        if pspi.len() != record.frames.len() {
            return Err(InterpretError::Shape(format!(
                "sequence {}: {} PSPI values for {} frames",
                record.key(),
                pspi.len(),
                record.frames.len()
            )));
        }
        for (frame, &p) in record.frames.iter().zip(pspi) {
            labels.insert(FrameKey::new(record, frame.frame_index), p > pspi_threshold);
        }
    }
    Ok(labels)
}

/// Feature rows (the intensities of `au_ids`, in that order) with labels,
/// ordered by frame key.
pub fn labeled_frames(
    records: &[SequenceRecord],
    au_ids: &[u8],
    pspi_threshold: f64,
) -> Result<Vec<LabeledFrame>, InterpretError> {
    let labels = frame_labels(records, pspi_threshold)?;
    let mut samples = Vec::with_capacity(labels.len());
    for record in records {
        for frame in &record.frames {
            let key = FrameKey::new(record, frame.frame_index);
            let row = au_ids
                .iter()
                .map(|au| {
                    frame.au_intensities.get(au).copied().ok_or_else(|| InterpretError::AtFrame {
                        frame: key.to_string(),
                        source: Box::new(InterpretError::MissingFeature { au: *au }),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let pain = labels[&key];
            samples.push(LabeledFrame { key, row, pain });
        }
    }
    samples.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosoOutcome {
    /// Predictions for every held-out frame, ordered by frame key.
    pub predictions: Vec<Prediction>,
    pub findings: Vec<String>,
}

/// Leave-one-subject-out: for each subject, trains on every other subject
/// and predicts the held-out frames. All folds use the same seed.
pub fn loso_predict(
    samples: &[LabeledFrame],
    feature_au_ids: &[u8],
    params: &ForestParams,
    seed: u64,
) -> Result<LosoOutcome, InterpretError> {
    let subjects: BTreeSet<&str> = samples.iter().map(|s| s.key.subject.as_str()).collect();
    if subjects.len() < 2 {
        return Err(InterpretError::TooFewSubjects { n: subjects.len() });
    }

    let folds: Vec<Result<Vec<Prediction>, String>> = subjects
        .par_iter()
        .map(|&held_out| {
            let (test, train): (Vec<&LabeledFrame>, Vec<&LabeledFrame>) =
                samples.iter().partition(|s| s.key.subject == held_out);
            let rows: Vec<Vec<f64>> = train.iter().map(|s| s.row.clone()).collect();
            let labels: Vec<bool> = train.iter().map(|s| s.pain).collect();
            let model = match train_forest(&rows, &labels, feature_au_ids, params, seed) {
                Ok(m) => m,
                Err(e) => return Err(format!("subject {held_out} skipped: {e}")),
            };
            Ok(test
                .iter()
                .map(|s| Prediction::new(s.key.clone(), model.confidence(&s.row)))
                .collect())
        })
        .collect();

    let mut outcome = LosoOutcome {
        predictions: Vec::new(),
        findings: Vec::new(),
    };
    for fold in folds {
        match fold {
            Ok(p) => outcome.predictions.extend(p),
            Err(finding) => outcome.findings.push(finding),
        }
    }
    outcome.predictions.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(outcome)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, label_pain: bool, predicted_pain: bool) {
        match (label_pain, predicted_pain) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// F1 of the pain class; `None` when the subject has neither pain frames
    /// nor pain predictions.
    pub fn f1(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        (denom > 0).then(|| 2.0 * self.tp as f64 / denom as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectF1 {
    pub subject_id: String,
    pub n_frames: usize,
    #[serde(flatten)]
    pub confusion: Confusion,
    pub f1: Option<f64>,
}

/// Per-subject F1 of `predictions` against `labels`, plus the mean over the
/// subjects where F1 is defined.
pub fn subject_f1(
    predictions: &[Prediction],
    labels: &BTreeMap<FrameKey, bool>,
) -> Result<(Vec<SubjectF1>, Option<f64>), InterpretError> {
    let mut per: BTreeMap<&str, Confusion> = BTreeMap::new();
    for p in predictions {
        let &label = labels
            .get(&p.key)
            .ok_or_else(|| InterpretError::MissingLabel { frame: p.key.to_string() })?;
        per.entry(p.key.subject.as_str()).or_default().add(label, p.is_pain());
    }
    let subjects: Vec<SubjectF1> = per
        .into_iter()
        .map(|(s, c)| SubjectF1 {
            subject_id: s.to_string(),
            n_frames: c.total(),
            f1: c.f1(),
            confusion: c,
        })
        .collect();
    let defined: Vec<f64> = subjects.iter().filter_map(|s| s.f1).collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok((subjects, mean))
}
