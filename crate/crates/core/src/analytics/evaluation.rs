use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pcc_p_value, pearson, AnalyticsError, Distribution};
use crate::engine::score_dataset;
use crate::model::{ScoredFrame, SequenceKey, SequenceRecord, TedConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectCorrelation {
    pub subject_id: String,
    pub pcc: f64,
    pub p_value: f64,
    pub n_frames: usize,
}

/// A subject left out of the aggregate, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSubject {
    pub subject_id: String,
    pub reason: String,
}

/// Per-subject correlations of TED against PSPI for one window length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub window: usize,
    pub subjects: Vec<SubjectCorrelation>,
    pub skipped: Vec<SkippedSubject>,
    /// Distribution of PCC across evaluated subjects.
    pub pcc: Option<Distribution>,
    pub mean_p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    /// One report per requested window, in the requested order.
    pub windows: Vec<EvalReport>,
    /// Window with the highest mean PCC (the first one on ties).
    pub best_window: Option<usize>,
}

/// Aligned (TED, PSPI) series per subject, each the concatenation of the
/// subject's sequences in sequence-id order. Frames with failed tracking are
/// left out.
pub fn subject_series(
    records: &[SequenceRecord],
    scores: &BTreeMap<SequenceKey, Vec<ScoredFrame>>,
) -> Result<BTreeMap<String, (Vec<f64>, Vec<f64>)>, AnalyticsError> {
    let by_key: BTreeMap<SequenceKey, &SequenceRecord> = records.iter().map(|r| (r.key(), r)).collect();
    let mut series: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (key, record) in by_key {
        let pspi = record
            .pspi
            .as_ref()
            .ok_or_else(|| AnalyticsError::MissingPspi { sequence: key.to_string() })?;
        let scored = scores
            .get(&key)
            .ok_or_else(|| AnalyticsError::MissingScores { sequence: key.to_string() })?;
        if pspi.len() != scored.len() {
            return Err(AnalyticsError::Misaligned {
                sequence: key.to_string(),
                scores: scored.len(),
                pspi: pspi.len(),
            });
        }
        let (ted, labels) = series.entry(key.subject_id.clone()).or_default();
        for (frame, &p) in scored.iter().zip(pspi) {
            if frame.tracking_ok {
                ted.push(frame.ted_score);
                labels.push(p);
            }
        }
    }
    Ok(series)
}

pub fn evaluate_subject(subject_id: &str, ted: &[f64], pspi: &[f64]) -> Result<SubjectCorrelation, AnalyticsError> {
    let pcc = pearson(ted, pspi)?;
    Ok(SubjectCorrelation {
        subject_id: subject_id.to_string(),
        pcc,
        p_value: pcc_p_value(pcc, ted.len())?,
        n_frames: ted.len(),
    })
}

fn aggregate(window: usize, outcomes: Vec<(String, Result<SubjectCorrelation, AnalyticsError>)>) -> EvalReport {
    let mut subjects = Vec::new();
    let mut skipped = Vec::new();
    for (subject_id, outcome) in outcomes {
        match outcome {
            Ok(c) => subjects.push(c),
            Err(e) => skipped.push(SkippedSubject {
                subject_id,
                reason: e.to_string(),
            }),
        }
    }
    let pccs: Vec<f64> = subjects.iter().map(|s| s.pcc).collect();
    let mean_p_value = if subjects.is_empty() {
        None
    } else {
        Some(subjects.iter().map(|s| s.p_value).sum::<f64>() / subjects.len() as f64)
    };
    EvalReport {
        window,
        pcc: Distribution::from_values(&pccs),
        mean_p_value,
        subjects,
        skipped,
    }
}

/// Evaluates already-scored sequences. Subjects whose correlation is
/// undefined (too few frames, constant series) are reported as skipped.
pub fn evaluate_scores(
    records: &[SequenceRecord],
    scores: &BTreeMap<SequenceKey, Vec<ScoredFrame>>,
    window: usize,
) -> Result<EvalReport, AnalyticsError> {
    let series = subject_series(records, scores)?;
    let outcomes: Vec<_> = series
        .par_iter()
        .map(|(subject, (ted, pspi))| (subject.clone(), evaluate_subject(subject, ted, pspi)))
        .collect();
    Ok(aggregate(window, outcomes))
}

/// Scores the dataset with `cfg` and evaluates every subject.
pub fn evaluate_dataset(records: &[SequenceRecord], cfg: &TedConfig) -> Result<EvalReport, AnalyticsError> {
    cfg.validate()?;
    let scored = score_dataset(records, cfg);
    if let Some(first) = scored.errors.into_iter().next() {
        return Err(AnalyticsError::Scoring {
            sequence: first.key.to_string(),
            source: first.error,
        });
    }
    evaluate_scores(records, &scored.results, cfg.window)
}

/// Re-scores and evaluates the dataset once per window.
pub fn window_ablation(
    records: &[SequenceRecord],
    base: &TedConfig,
    windows: &[usize],
) -> Result<AblationReport, AnalyticsError> {
    if windows.is_empty() {
        return Err(AnalyticsError::NoWindows);
    }
    let reports = windows
        .par_iter()
        .map(|&w| {
            let cfg = TedConfig {
                window: w,
                ..base.clone()
            };
            evaluate_dataset(records, &cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut best: Option<(usize, f64)> = None;
    for report in &reports {
        if let Some(mean) = report.pcc.as_ref().map(|d| d.mean) {
            if best.is_none_or(|(_, b)| mean > b) {
                best = Some((report.window, mean));
            }
        }
    }
    Ok(AblationReport {
        windows: reports,
        best_window: best.map(|(w, _)| w),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

pub fn render_eval_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "window {}", report.window);
    let _ = writeln!(out, "{:<16} {:>8} {:>12} {:>8}", "subject", "pcc", "p_value", "frames");
    for s in &report.subjects {
        let _ = writeln!(out, "{:<16} {:>8.4} {:>12.4e} {:>8}", s.subject_id, s.pcc, s.p_value, s.n_frames);
    }
    for s in &report.skipped {
        let _ = writeln!(out, "{:<16} skipped: {}", s.subject_id, s.reason);
    }
    let d = report.pcc.as_ref();
    let _ = writeln!(
        out,
        "mean pcc {}  median {}  q1 {}  q3 {}  mean p {}",
        opt(d.map(|d| d.mean)),
        opt(d.map(|d| d.median)),
        opt(d.map(|d| d.q1)),
        opt(d.map(|d| d.q3)),
        opt(report.mean_p_value)
    );
    out
}

pub fn render_ablation_text(report: &AblationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "window", "subjects", "mean", "median", "q1", "q3", "mean_p"
    );
    for r in &report.windows {
        let d = r.pcc.as_ref();
        let _ = writeln!(
            out,
            "{:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            r.window,
            r.subjects.len(),
            opt(d.map(|d| d.mean)),
            opt(d.map(|d| d.median)),
            opt(d.map(|d| d.q1)),
            opt(d.map(|d| d.q3)),
            opt(r.mean_p_value)
        );
    }
    let best = report.best_window.map_or_else(|| "-".to_string(), |w| w.to_string());
    let _ = writeln!(out, "best window: {best}");
    out
}

/// One row per (window, subject): `window,subject,pcc,p_value,n_frames`.
pub fn write_correlations_csv<W: std::io::Write>(writer: W, reports: &[EvalReport]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["window", "subject", "pcc", "p_value", "n_frames"])?;
    for r in reports {
        for s in &r.subjects {
            wtr.write_record([
                r.window.to_string(),
                s.subject_id.clone(),
                format!("{:.16e}", s.pcc),
                format!("{:.16e}", s.p_value),
                s.n_frames.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
