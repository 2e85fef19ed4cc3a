use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AnalyticsError, Distribution};
use crate::model::{Gender, ScoredFrame, SequenceKey, SequenceRecord};

/// Sequence-level label used for grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    #[serde(rename = "VAS")]
    Vas,
    #[serde(rename = "OPI")]
    Opi,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Vas => "VAS",
            Scale::Opi => "OPI",
        })
    }
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "VAS" => Ok(Scale::Vas),
            "OPI" => Ok(Scale::Opi),
            _ => Err(format!("unknown scale '{s}' (expected VAS or OPI)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    /// Natural logarithm.
    Log,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub label: u8,
    /// `None` when the group pools all genders.
    pub gender: Option<Gender>,
    pub stats: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub scale: Scale,
    pub transform: Transform,
    pub total_frames: usize,
    pub by_label: Vec<GroupStats>,
    pub by_label_gender: Vec<GroupStats>,
}

/// Groups every scored frame by its sequence's label on `scale` (and by
/// gender) and describes the (optionally log-transformed) TED scores.
pub fn summarize(
    records: &[SequenceRecord],
    scores: &BTreeMap<SequenceKey, Vec<ScoredFrame>>,
    scale: Scale,
    transform: Transform,
) -> Result<SummaryReport, AnalyticsError> {
    let mut by_label: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    let mut by_label_gender: BTreeMap<(u8, Gender), Vec<f64>> = BTreeMap::new();
    let mut total_frames = 0;

    let ordered: BTreeMap<SequenceKey, &SequenceRecord> = records.iter().map(|r| (r.key(), r)).collect();
    for (key, record) in ordered {
        let labels = record.labels.ok_or_else(|| AnalyticsError::MissingLabel {
            sequence: key.to_string(),
            scale: scale.to_string(),
        })?;
        let label = match scale {
            Scale::Vas => labels.vas,
            Scale::Opi => labels.opi,
        };
        let gender = record.gender.unwrap_or(Gender::Unspecified);
        let frames = scores
            .get(&key)
            .ok_or_else(|| AnalyticsError::MissingScores { sequence: key.to_string() })?;
        for frame in frames {
            let value = match transform {
                Transform::None => frame.ted_score,
                Transform::Log if frame.ted_score > 0.0 => frame.ted_score.ln(),
                Transform::Log => {
                    return Err(AnalyticsError::NonPositiveScore {
                        sequence: key.to_string(),
                        frame: frame.frame_index,
                        score: frame.ted_score,
                    })
                }
            };
            by_label.entry(label).or_default().push(value);
            by_label_gender.entry((label, gender)).or_default().push(value);
            total_frames += 1;
        }
    }

    let group = |label, gender, values: &[f64]| {
        Distribution::from_values(values).map(|stats| GroupStats { label, gender, stats })
    };
    Ok(SummaryReport {
        scale,
        transform,
        total_frames,
        by_label: by_label.iter().filter_map(|(&l, v)| group(l, None, v)).collect(),
        by_label_gender: by_label_gender
            .iter()
            .filter_map(|(&(l, g), v)| group(l, Some(g), v))
            .collect(),
    })
}

fn gender_name(g: Option<Gender>) -> &'static str {
    g.map_or("all", Gender::as_str)
}

pub fn render_summary_text(report: &SummaryReport) -> String {
    let mut out = String::new();
    let transform = match report.transform {
        Transform::Log => "log TED",
        Transform::None => "TED",
    };
    let _ = writeln!(out, "{transform} by {} ({} frames)", report.scale, report.total_frames);
    let _ = writeln!(
        out,
        "{:>5} {:<12} {:>8} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        report.scale, "gender", "count", "min", "q1", "median", "q3", "max", "mean", "std"
    );
    for g in report.by_label.iter().chain(&report.by_label_gender) {
        let s = &g.stats;
        let _ = writeln!(
            out,
            "{:>5} {:<12} {:>8} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            g.label,
            gender_name(g.gender),
            s.count,
            s.min,
            s.q1,
            s.median,
            s.q3,
            s.max,
            s.mean,
            s.std
        );
    }
    out
}

/// Box-plot series, one row per group: label, gender (or `all`), count and
/// the distribution statistics.
pub fn write_summary_csv<W: std::io::Write>(writer: W, report: &SummaryReport) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["label", "gender", "count", "min", "q1", "median", "q3", "max", "mean", "std"])?;
    for g in report.by_label.iter().chain(&report.by_label_gender) {
        let s = &g.stats;
        let mut row = vec![g.label.to_string(), gender_name(g.gender).to_string(), s.count.to_string()];
        row.extend([s.min, s.q1, s.median, s.q3, s.max, s.mean, s.std].iter().map(|v| format!("{v:.16e}")));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FrameFeatures, Labels, PerFeature};

    fn record(seq: &str, vas: u8, gender: Option<Gender>, n: u32) -> SequenceRecord {
        SequenceRecord {
            subject_id: "s".into(),
            sequence_id: seq.into(),
            frames: (1..=n).map(|i| FrameFeatures::zeroed(i, 2)).collect(),
            pspi: None,
            labels: Some(Labels { vas, sen: 0, aff: 0, opi: vas / 2 }),
            gender,
        }
    }

    fn constant(n: u32, ted: f64) -> Vec<ScoredFrame> {
        (1..=n)
            .map(|i| ScoredFrame {
                frame_index: i,
                static_score: ted,
                dynamics: PerFeature::splat(0.0),
                relative_change: PerFeature::splat(0.0),
                direction: PerFeature::splat(1),
                ted_score: ted,
                tracking_ok: true,
            })
            .collect()
    }

    #[test]
    fn neutral_sequence_median_is_ln6() {
        let r = record("1", 0, Some(Gender::Male), 5);
        let scores = BTreeMap::from([(r.key(), constant(5, 6.0))]);
        let report = summarize(&[r], &scores, Scale::Vas, Transform::Log).unwrap();
        assert_eq!(report.by_label.len(), 1);
        assert!((report.by_label[0].stats.median - 1.791_759_469_228_055).abs() < 1e-12);
        assert_eq!(report.total_frames, 5);
    }

    #[test]
    fn genders_form_separate_groups() {
        let a = record("1", 3, Some(Gender::Male), 4);
        let b = record("2", 3, None, 2);
        let scores = BTreeMap::from([(a.key(), constant(4, 10.0)), (b.key(), constant(2, 20.0))]);
        let report = summarize(&[a, b], &scores, Scale::Vas, Transform::None).unwrap();
        assert_eq!(report.by_label_gender.len(), 2);
        assert_eq!(report.by_label_gender[0].gender, Some(Gender::Male));
        assert_eq!(report.by_label_gender[0].stats.median, 10.0);
        assert_eq!(report.by_label_gender[1].gender, Some(Gender::Unspecified));
        assert_eq!(report.by_label_gender[1].stats.median, 20.0);
        let counted: usize = report.by_label_gender.iter().map(|g| g.stats.count).sum();
        assert_eq!(counted, report.total_frames);
    }

    #[test]
    fn missing_label_names_sequence() {
        let mut r = record("7", 0, None, 1);
        r.labels = None;
        let scores = BTreeMap::from([(r.key(), constant(1, 6.0))]);
        let err = summarize(&[r], &scores, Scale::Opi, Transform::Log).unwrap_err();
        assert!(err.to_string().contains("s/7"));
    }

    #[test]
    fn log_of_non_positive_score_is_an_error() {
        let r = record("1", 0, None, 1);
        let scores = BTreeMap::from([(r.key(), constant(1, -0.5))]);
        assert!(matches!(
            summarize(&[r], &scores, Scale::Vas, Transform::Log),
            Err(AnalyticsError::NonPositiveScore { .. })
        ));
    }
}
