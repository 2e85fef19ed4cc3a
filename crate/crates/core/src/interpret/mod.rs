//! Frame-level pain classification and its audit against TED scores.
//!
//! A random forest is trained on AU intensities with leave-one-subject-out
//! validation (or predictions are imported from elsewhere). Each prediction
//! is placed in one of four scenarios against the ground truth, and within
//! each scenario the classifier's pain confidence is compared to the frame's
//! TED score: the expectation is that confidence rises with the score.

mod agreement;
mod forest;
mod loso;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agreement::{
    agreement_analysis, flag_kind, AgreementReport, AgreementThresholds, Flag, FlagKind,
    JoinedPrediction, ScenarioAgreement,
};
pub use forest::{train_forest, ForestModel, ForestParams, Node, Tree, MODEL_FORMAT_VERSION};
pub use loso::{
    frame_labels, labeled_frames, loso_predict, subject_f1, Confusion, LabeledFrame, LosoOutcome,
    SubjectF1,
};

use crate::model::{ScoredFrame, SequenceKey, SequenceRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpretError {
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("feature AU{au} missing")]
    MissingFeature { au: u8 },
    #[error("{0}")]
    Shape(String),
    #[error("invalid forest parameters: {0}")]
    Params(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("leave-one-subject-out needs at least 2 subjects, found {n}")]
    TooFewSubjects { n: usize },
    #[error("sequence {sequence} has no PSPI labels")]
    MissingPspi { sequence: String },
    #[error("no ground truth for frame {frame}")]
    MissingLabel { frame: String },
    #[error("no TED score for frame {frame}")]
    MissingScore { frame: String },
    #[error("frame {frame}: {source}")]
    AtFrame {
        frame: String,
        #[source]
        source: Box<InterpretError>,
    },
    #[error("{path}: line {line}: {message}")]
    PredictionsFile { path: String, line: u64, message: String },
}

/// Identifies one frame of the dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FrameKey {
    pub subject: String,
    pub sequence: String,
    pub frame: u32,
}

impl FrameKey {
    pub fn new(record: &SequenceRecord, frame: u32) -> Self {
        Self {
            subject: record.subject_id.clone(),
            sequence: record.sequence_id.clone(),
            frame,
        }
    }
}

impl fmt::Display for FrameKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}#{}", self.subject, self.sequence, self.frame)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Pain,
    Neutral,
}

/// Confidence at or above this predicts pain.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(flatten)]
    pub key: FrameKey,
    pub confidence_pain: f64,
    pub predicted: Class,
}

impl Prediction {
    pub fn new(key: FrameKey, confidence_pain: f64) -> Self {
        let predicted = if confidence_pain >= DECISION_THRESHOLD {
            Class::Pain
        } else {
            Class::Neutral
        };
        Self {
            key,
            confidence_pain,
            predicted,
        }
    }

    pub fn is_pain(&self) -> bool {
        self.predicted == Class::Pain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Pain classified as pain.
    #[serde(rename = "TP")]
    TruePositive,
    /// Neutral classified as neutral.
    #[serde(rename = "TN")]
    TrueNegative,
    /// Neutral classified as pain.
    #[serde(rename = "type1")]
    Type1,
    /// Pain classified as neutral.
    #[serde(rename = "type2")]
    Type2,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::TruePositive,
        Scenario::TrueNegative,
        Scenario::Type1,
        Scenario::Type2,
    ];

    pub fn of(label_pain: bool, predicted_pain: bool) -> Self {
        match (label_pain, predicted_pain) {
            (true, true) => Scenario::TruePositive,
            (false, false) => Scenario::TrueNegative,
            (false, true) => Scenario::Type1,
            (true, false) => Scenario::Type2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::TruePositive => "TP",
            Scenario::TrueNegative => "TN",
            Scenario::Type1 => "type1",
            Scenario::Type2 => "type2",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Splits predictions into the four scenarios against `labels`.
pub fn scenario_partition(
    predictions: &[Prediction],
    labels: &BTreeMap<FrameKey, bool>,
) -> Result<BTreeMap<Scenario, Vec<Prediction>>, InterpretError> {
    let mut out: BTreeMap<Scenario, Vec<Prediction>> = BTreeMap::new();
    for p in predictions {
        let &label = labels
            .get(&p.key)
            .ok_or_else(|| InterpretError::MissingLabel { frame: p.key.to_string() })?;
        out.entry(Scenario::of(label, p.is_pain())).or_default().push(p.clone());
    }
    Ok(out)
}

/// Attaches ground truth and the TED score to every prediction.
pub fn join_predictions(
    predictions: &[Prediction],
    labels: &BTreeMap<FrameKey, bool>,
    scores: &BTreeMap<SequenceKey, Vec<ScoredFrame>>,
) -> Result<Vec<JoinedPrediction>, InterpretError> {
    let mut ted: BTreeMap<FrameKey, f64> = BTreeMap::new();
    for (key, frames) in scores {
        for f in frames {
            ted.insert(
                FrameKey {
                    subject: key.subject_id.clone(),
                    sequence: key.sequence_id.clone(),
                    frame: f.frame_index,
                },
                f.ted_score,
            );
        }
    }
    predictions
        .iter()
        .map(|p| {
            let label_pain = *labels
                .get(&p.key)
                .ok_or_else(|| InterpretError::MissingLabel { frame: p.key.to_string() })?;
            let ted_score = *ted
                .get(&p.key)
                .ok_or_else(|| InterpretError::MissingScore { frame: p.key.to_string() })?;
            Ok(JoinedPrediction {
                prediction: p.clone(),
                label_pain,
                ted_score,
            })
        })
        .collect()
}

const PREDICTIONS_HEADER: [&str; 5] = ["subject", "sequence", "frame", "confidence_pain", "predicted"];

pub fn write_predictions_csv<W: Write>(writer: W, predictions: &[Prediction]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(PREDICTIONS_HEADER)?;
    for p in predictions {
        let class = match p.predicted {
            Class::Pain => "pain",
            Class::Neutral => "neutral",
        };
        wtr.write_record([
            p.key.subject.as_str(),
            p.key.sequence.as_str(),
            &p.key.frame.to_string(),
            &format!("{:.16e}", p.confidence_pain),
            class,
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads third-party predictions. `predicted` may be `pain`/`neutral` or
/// `1`/`0` and must agree with the 0.5 confidence threshold.
pub fn read_predictions_csv<R: Read>(reader: R, origin: &Path) -> Result<Vec<Prediction>, InterpretError> {
    let path = origin.display().to_string();
    let fail = |line: u64, message: String| InterpretError::PredictionsFile {
        path: path.clone(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| fail(1, e.to_string()))?
        .iter()
        .map(str::to_ascii_lowercase)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| fail(1, format!("missing column '{name}'")))
    };
    let cols = [col("subject")?, col("sequence")?, col("frame")?, col("confidence_pain")?, col("predicted")?];

    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(|e| fail(0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |i: usize| record.get(cols[i]).unwrap_or("");
        let frame: u32 = get(2).parse().map_err(|_| fail(line, format!("bad frame '{}'", get(2))))?;
        let confidence: f64 = get(3)
            .parse()
            .ok()
            .filter(|c: &f64| (0.0..=1.0).contains(c))
            .ok_or_else(|| fail(line, format!("confidence '{}' is not in [0, 1]", get(3))))?;
        let claimed = match get(4).to_ascii_lowercase().as_str() {
            "pain" | "1" => Class::Pain,
            "neutral" | "0" => Class::Neutral,
            other => return Err(fail(line, format!("unknown class '{other}'"))),
        };
        let key = FrameKey {
            subject: get(0).to_string(),
            sequence: get(1).to_string(),
            frame,
        };
        let prediction = Prediction::new(key.clone(), confidence);
        if prediction.predicted != claimed {
            return Err(fail(
                line,
                format!("predicted class disagrees with confidence {confidence} at threshold 0.5"),
            ));
        }
        if seen.insert(key.clone(), line).is_some() {
            return Err(fail(line, format!("duplicate frame {key}")));
        }
        out.push(prediction);
    }
    out.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(out)
}

/// Per-subject confusion counts and F1: `subject,n_frames,tp,tn,fp,fn,f1`
/// (empty F1 when undefined).
pub fn write_subject_f1_csv<W: Write>(writer: W, subjects: &[SubjectF1]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["subject", "n_frames", "tp", "tn", "fp", "fn", "f1"])?;
    for s in subjects {
        let c = &s.confusion;
        wtr.write_record([
            s.subject_id.clone(),
            s.n_frames.to_string(),
            c.tp.to_string(),
            c.tn.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            s.f1.map_or_else(String::new, |f| format!("{f:.16e}")),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Where the predictions under audit come from.
#[derive(Debug, Clone)]
pub enum PredictionSource {
    /// Leave-one-subject-out forest predictions.
    Loso { params: ForestParams, seed: u64 },
    /// A trained model applied to every frame.
    Model(ForestModel),
    /// Imported predictions.
    External(Vec<Prediction>),
}

#[derive(Debug, Clone)]
pub struct InterpretOptions {
    pub feature_au_ids: Vec<u8>,
    pub pspi_threshold: f64,
    pub thresholds: AgreementThresholds,
    pub source: PredictionSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretReport {
    /// `loso`, `model` or `external`.
    pub source: String,
    pub feature_au_ids: Vec<u8>,
    pub pspi_threshold: f64,
    pub params: Option<ForestParams>,
    pub seed: Option<u64>,
    pub subjects: Vec<SubjectF1>,
    pub mean_f1: Option<f64>,
    pub scenario_counts: BTreeMap<Scenario, usize>,
    pub agreement: AgreementReport,
    pub findings: Vec<String>,
}

/// Produces predictions from `opts.source`, scores them against PSPI labels
/// and audits them against the TED scores.
pub fn interpret(
    records: &[SequenceRecord],
    scores: &BTreeMap<SequenceKey, Vec<ScoredFrame>>,
    opts: &InterpretOptions,
) -> Result<(InterpretReport, Vec<Prediction>), InterpretError> {
    let labels = frame_labels(records, opts.pspi_threshold)?;
    let mut findings = Vec::new();
    let (source, params, seed, predictions) = match &opts.source {
        PredictionSource::Loso { params, seed } => {
            let samples = labeled_frames(records, &opts.feature_au_ids, opts.pspi_threshold)?;
            let outcome = loso_predict(&samples, &opts.feature_au_ids, params, *seed)?;
            findings.extend(outcome.findings);
            ("loso", Some(params.clone()), Some(*seed), outcome.predictions)
        }
        PredictionSource::Model(model) => {
            let samples = labeled_frames(records, &model.feature_au_ids, opts.pspi_threshold)?;
            let predictions = samples
                .iter()
                .map(|s| Prediction::new(s.key.clone(), model.confidence(&s.row)))
                .collect();
            ("model", Some(model.params.clone()), Some(model.seed), predictions)
        }
        PredictionSource::External(p) => ("external", None, None, p.clone()),
    };

    let (subjects, mean_f1) = subject_f1(&predictions, &labels)?;
    for s in subjects.iter().filter(|s| s.f1.is_none()) {
        findings.push(format!(
            "subject {}: F1 undefined (no pain frames and no pain predictions); left out of the mean",
            s.subject_id
        ));
    }
    let partition = scenario_partition(&predictions, &labels)?;
    let scenario_counts = Scenario::ALL
        .iter()
        .map(|&s| (s, partition.get(&s).map_or(0, Vec::len)))
        .collect();
    let joined = join_predictions(&predictions, &labels, scores)?;
    let agreement = agreement_analysis(&joined, &opts.thresholds);

    let report = InterpretReport {
        source: source.to_string(),
        feature_au_ids: match &opts.source {
            PredictionSource::Model(m) => m.feature_au_ids.clone(),
            _ => opts.feature_au_ids.clone(),
        },
        pspi_threshold: opts.pspi_threshold,
        params,
        seed,
        subjects,
        mean_f1,
        scenario_counts,
        agreement,
        findings,
    };
    Ok((report, predictions))
}

/// Trains one forest on every frame (for persistence).
pub fn train_on_records(
    records: &[SequenceRecord],
    feature_au_ids: &[u8],
    pspi_threshold: f64,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, InterpretError> {
    let samples = labeled_frames(records, feature_au_ids, pspi_threshold)?;
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.row.clone()).collect();
    let labels: Vec<bool> = samples.iter().map(|s| s.pain).collect();
    train_forest(&rows, &labels, feature_au_ids, params, seed)
}

pub fn render_interpret_text(report: &InterpretReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "predictions: {}", report.source);
    let _ = writeln!(out, "{:<16} {:>7} {:>6} {:>6} {:>6} {:>6} {:>8}", "subject", "frames", "tp", "tn", "fp", "fn", "f1");
    for s in &report.subjects {
        let c = &s.confusion;
        let f1 = s.f1.map_or_else(|| "-".to_string(), |f| format!("{f:.4}"));
        let _ = writeln!(
            out,
            "{:<16} {:>7} {:>6} {:>6} {:>6} {:>6} {:>8}",
            s.subject_id, s.n_frames, c.tp, c.tn, c.fp, c.fn_, f1
        );
    }
    let mean = report.mean_f1.map_or_else(|| "-".to_string(), |f| format!("{f:.4}"));
    let _ = writeln!(out, "mean F1 {mean}");
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<8} {:>7} {:>9} {:>10} {:>10}", "scenario", "frames", "pearson", "mean_ted", "mean_conf");
    for s in &report.agreement.scenarios {
        let r = s.pearson.map_or_else(|| "-".to_string(), |r| format!("{r:.4}"));
        let _ = writeln!(
            out,
            "{:<8} {:>7} {:>9} {:>10.3} {:>10.4}",
            s.scenario.name(),
            s.n,
            r,
            s.mean_ted,
            s.mean_confidence
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "flagged frames: {}", report.agreement.flags.len());
    for f in &report.agreement.flags {
        let _ = writeln!(
            out,
            "  {} {} ted {:.3} confidence {:.3} ({:?})",
            f.key, f.scenario, f.ted_score, f.confidence_pain, f.kind
        );
    }
    for finding in report.findings.iter().chain(&report.agreement.findings) {
        let _ = writeln!(out, "note: {finding}");
    }
    out
}
