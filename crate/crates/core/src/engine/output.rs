//! Scored-frame CSV: one row per frame, ordered by (subject, sequence, frame).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::model::{FeatureSet, ScoredFrame, SequenceKey};

pub const SCORES_HEADER: [&str; 12] = [
    "subject", "sequence", "frame", "S", "M_L", "M_Ho", "M_Hr", "M_Gl", "M_Gr", "M_I", "ted_score",
    "tracking_ok",
];

/// The flattened form of one scored frame as it appears in the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub subject: String,
    pub sequence: String,
    pub frame: u32,
    pub static_score: f64,
    pub dynamics: [f64; 6],
    pub ted_score: f64,
    pub tracking_ok: bool,
}

impl ScoreRow {
    pub fn from_scored(key: &SequenceKey, frame: &ScoredFrame) -> Self {
        Self {
            subject: key.subject_id.clone(),
            sequence: key.sequence_id.clone(),
            frame: frame.frame_index,
            static_score: frame.static_score,
            dynamics: frame.dynamics.0,
            ted_score: frame.ted_score,
            tracking_ok: frame.tracking_ok,
        }
    }

    pub fn m(&self, fs: FeatureSet) -> f64 {
        self.dynamics[fs.index()]
    }
}

/// 17 significant digits: enough for any f64 to parse back to itself.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_scores_csv<W: Write>(
    writer: W,
    scores: &BTreeMap<SequenceKey, Vec<ScoredFrame>>,
) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SCORES_HEADER)?;
    for (key, frames) in scores {
        let mut ordered: Vec<&ScoredFrame> = frames.iter().collect();
        ordered.sort_by_key(|f| f.frame_index);
        for f in ordered {
            let mut record = vec![key.subject_id.clone(), key.sequence_id.clone(), f.frame_index.to_string()];
            record.push(real(f.static_score));
            record.extend(f.dynamics.0.iter().map(|&m| real(m)));
            record.push(real(f.ted_score));
            record.push(f.tracking_ok.to_string());
            wtr.write_record(&record)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ReadScoresError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
    #[error("line {line}, column {column}: cannot parse {value:?}")]
    Parse { line: u64, column: String, value: String },
}

pub fn read_scores_csv<R: Read>(reader: R) -> Result<Vec<ScoreRow>, ReadScoresError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != SCORES_HEADER {
        return Err(ReadScoresError::Header(header));
    }
    let mut rows = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |i: usize| ReadScoresError::Parse {
            line,
            column: SCORES_HEADER[i].to_string(),
            value: field(i).to_string(),
        };
        let num = |i: usize| field(i).parse::<f64>().map_err(|_| bad(i));
        let mut dynamics = [0.0; 6];
        for (k, m) in dynamics.iter_mut().enumerate() {
            *m = num(4 + k)?;
        }
        rows.push(ScoreRow {
            subject: field(0).to_string(),
            sequence: field(1).to_string(),
            frame: field(2).parse().map_err(|_| bad(2))?,
            static_score: num(3)?,
            dynamics,
            ted_score: num(10)?,
            tracking_ok: field(11).parse().map_err(|_| bad(11))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PerFeature;

    fn scored(i: u32, m: f64) -> ScoredFrame {
        ScoredFrame {
            frame_index: i,
            static_score: 6.0 + 0.1 + 0.2,
            dynamics: PerFeature([m, -m / 3.0, 0.0, 1.0, 1e-300, 2.0_f64.sqrt()]),
            relative_change: PerFeature::splat(0.0),
            direction: PerFeature::splat(1),
            ted_score: std::f64::consts::PI * m,
            tracking_ok: i.is_multiple_of(2),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let mut scores = BTreeMap::new();
        scores.insert(SequenceKey::new("b", "1"), vec![scored(2, 0.7), scored(1, 1.0 / 7.0)]);
        scores.insert(SequenceKey::new("a", "9"), vec![scored(1, -0.25)]);
        let mut buf = Vec::new();
        write_scores_csv(&mut buf, &scores).unwrap();
        let rows = read_scores_csv(buf.as_slice()).unwrap();
        let expected: Vec<ScoreRow> = scores
            .iter()
            .flat_map(|(k, v)| {
                let mut v = v.clone();
                v.sort_by_key(|f| f.frame_index);
                v.into_iter().map(move |f| ScoreRow::from_scored(k, &f)).collect::<Vec<_>>()
            })
            .collect();
        assert_eq!(rows, expected);
        assert_eq!(rows[0].subject, "a");
        assert_eq!(rows[1].frame, 1);
    }

    #[test]
    fn header_is_checked() {
        assert!(matches!(read_scores_csv("a,b\n".as_bytes()), Err(ReadScoresError::Header(_))));
    }
}
