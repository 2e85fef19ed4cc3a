//! Does the classifier's pain confidence rise with the TED score? Per
//! scenario correlations, plus the frames where the two clearly disagree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FrameKey, Prediction, Scenario};
use crate::analytics::pearson;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementThresholds {
    /// A TED score at or above this is expressive.
    pub high_ted: f64,
    /// A confidence at or below this means "no pain".
    pub low_confidence: f64,
    /// A TED score at or below this is inexpressive.
    pub low_ted: f64,
    /// A confidence at or above this means "pain".
    pub high_confidence: f64,
}

impl Default for AgreementThresholds {
    fn default() -> Self {
        Self {
            high_ted: 100.0,
            low_confidence: 0.1,
            low_ted: 6.0,
            high_confidence: 0.9,
        }
    }
}

/// A prediction with its ground truth and the frame's TED score.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedPrediction {
    pub prediction: Prediction,
    pub label_pain: bool,
    pub ted_score: f64,
}

impl JoinedPrediction {
    pub fn scenario(&self) -> Scenario {
        Scenario::of(self.label_pain, self.prediction.is_pain())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagKind {
    HighScoreLowConfidence,
    LowScoreHighConfidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    #[serde(flatten)]
    pub key: FrameKey,
    pub scenario: Scenario,
    pub kind: FlagKind,
    pub ted_score: f64,
    pub confidence_pain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioAgreement {
    pub scenario: Scenario,
    pub n: usize,
    /// Pearson correlation of TED score and pain confidence; `None` when
    /// undefined (fewer than 3 frames or a constant series).
    pub pearson: Option<f64>,
    pub mean_ted: f64,
    pub mean_confidence: f64,
    /// (ted_score, confidence_pain) per frame, in frame-key order.
    pub pairs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub thresholds: AgreementThresholds,
    pub scenarios: Vec<ScenarioAgreement>,
    pub flags: Vec<Flag>,
    pub findings: Vec<String>,
}

pub fn flag_kind(ted_score: f64, confidence: f64, t: &AgreementThresholds) -> Option<FlagKind> {
    if ted_score >= t.high_ted && confidence <= t.low_confidence {
        Some(FlagKind::HighScoreLowConfidence)
    } else if ted_score <= t.low_ted && confidence >= t.high_confidence {
        Some(FlagKind::LowScoreHighConfidence)
    } else {
        None
    }
}

pub fn agreement_analysis(joined: &[JoinedPrediction], thresholds: &AgreementThresholds) -> AgreementReport {
    let mut buckets: BTreeMap<Scenario, Vec<&JoinedPrediction>> = BTreeMap::new();
    for j in joined {
        buckets.entry(j.scenario()).or_default().push(j);
    }

    let mut report = AgreementReport {
        thresholds: *thresholds,
        scenarios: Vec::new(),
        flags: Vec::new(),
        findings: Vec::new(),
    };
    for scenario in Scenario::ALL {
        let Some(items) = buckets.get_mut(&scenario) else {
            report.findings.push(format!("scenario {scenario}: no frames"));
            continue;
        };
        items.sort_by(|a, b| a.prediction.key.cmp(&b.prediction.key));
        let ted: Vec<f64> = items.iter().map(|j| j.ted_score).collect();
        let conf: Vec<f64> = items.iter().map(|j| j.prediction.confidence_pain).collect();
        let r = match pearson(&ted, &conf) {
            Ok(r) => Some(r),
            Err(e) => {
                report.findings.push(format!("scenario {scenario}: correlation not reported: {e}"));
                None
            }
        };
        let n = items.len();
        report.scenarios.push(ScenarioAgreement {
            scenario,
            n,
            pearson: r,
            mean_ted: ted.iter().sum::<f64>() / n as f64,
            mean_confidence: conf.iter().sum::<f64>() / n as f64,
            pairs: ted.iter().copied().zip(conf.iter().copied()).collect(),
        });
    }

    let mut ordered: Vec<&JoinedPrediction> = joined.iter().collect();
    ordered.sort_by(|a, b| a.prediction.key.cmp(&b.prediction.key));
    for j in ordered {
        if let Some(kind) = flag_kind(j.ted_score, j.prediction.confidence_pain, thresholds) {
            report.flags.push(Flag {
                key: j.prediction.key.clone(),
                scenario: j.scenario(),
                kind,
                ted_score: j.ted_score,
                confidence_pain: j.prediction.confidence_pain,
            });
        }
    }
    report
}
