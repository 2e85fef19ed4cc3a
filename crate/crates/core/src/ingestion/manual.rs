use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::IngestError;
use crate::model::{AuIntensity, AuProfile, AuSource, FrameFeatures};

/// Frame index to (AU id to intensity), as read from a manual FACS coding file.
pub type ManualAuMap = BTreeMap<u32, BTreeMap<u8, AuIntensity>>;

/// Reads a `frame,au,level` coding file. Letter grades map A=1 .. E=5;
/// numeric grades 0..=5 are taken as-is.
pub fn parse_manual_au_file(path: &Path) -> Result<ManualAuMap, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_manual_au(file, path)
}

fn parse_grade(raw: &str) -> Option<f64> {
    match raw.to_ascii_uppercase().as_str() {
        "A" => Some(1.0),
        "B" => Some(2.0),
        "C" => Some(3.0),
        "D" => Some(4.0),
        "E" => Some(5.0),
        other => match other.parse::<u8>() {
            Ok(v) if v <= 5 => Some(f64::from(v)),
            _ => None,
        },
    }
}

fn parse_au_id(raw: &str) -> Option<u8> {
    let digits = raw
        .strip_prefix("AU")
        .or_else(|| raw.strip_prefix("au"))
        .unwrap_or(raw);
    digits.parse().ok()
}

pub fn read_manual_au<R: Read>(reader: R, origin: &Path) -> Result<ManualAuMap, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| IngestError::csv(origin, e))?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::MissingColumn {
                path: origin.to_path_buf(),
                column: name.to_string(),
            })
    };
    if header.iter().all(str::is_empty) {
        return Err(IngestError::EmptyInput {
            path: origin.to_path_buf(),
        });
    }
    let (frame_col, au_col, level_col) = (column("frame")?, column("au")?, column("level")?);

    let mut map = ManualAuMap::new();
    for result in rdr.records() {
        let record = result.map_err(|e| IngestError::csv(origin, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |idx: usize| IngestError::Parse {
            path: origin.to_path_buf(),
            line,
            column: header[idx].to_string(),
            value: record.get(idx).unwrap_or("").to_string(),
        };
        let frame: u32 = record
            .get(frame_col)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(frame_col))?;
        let au = record.get(au_col).and_then(parse_au_id).ok_or_else(|| bad(au_col))?;
        let level = record.get(level_col).and_then(parse_grade).ok_or_else(|| bad(level_col))?;
        let intensity = AuIntensity::new(au, level).map_err(|_| bad(au_col))?;
        if map.entry(frame).or_default().insert(au, intensity).is_some() {
            return Err(IngestError::DuplicateEntry {
                path: origin.to_path_buf(),
                line,
                frame,
                au,
            });
        }
    }
    if map.is_empty() {
        return Err(IngestError::EmptyInput {
            path: origin.to_path_buf(),
        });
    }
    Ok(map)
}

/// Writes a manual coding map with numeric levels.
pub fn write_manual_au<W: Write>(writer: W, map: &ManualAuMap) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["frame", "au", "level"])?;
    for (frame, aus) in map {
        for (au, intensity) in aus {
            wtr.write_record([frame.to_string(), au.to_string(), intensity.level.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Chooses where each frame's AU intensities come from.
///
/// In manual mode every frame must appear in `manual`; the intensities of the
/// profile AUs are replaced by the coded values, with uncoded profile AUs set
/// to 0. With `profile = None` the AU universe is every AU that appears
/// anywhere in `manual`. Predicted mode returns the frames unchanged.
pub fn merge_au_source(
    frames: Vec<FrameFeatures>,
    manual: &ManualAuMap,
    mode: AuSource,
    profile: Option<&AuProfile>,
) -> Result<Vec<FrameFeatures>, IngestError> {
    if mode == AuSource::Predicted {
        return Ok(frames);
    }
    let universe: BTreeSet<u8> = match profile {
        Some(p) => p.au_ids.iter().copied().collect(),
        None => manual.values().flat_map(|aus| aus.keys().copied()).collect(),
    };
    frames
        .into_iter()
        .map(|mut frame| {
            let coded = manual
                .get(&frame.frame_index)
                .ok_or(IngestError::Coverage {
                    frame: frame.frame_index,
                })?;
            for &au in &universe {
                let level = coded.get(&au).map_or(0.0, |i| i.level);
                frame.au_intensities.insert(au, level);
            }
            Ok(frame)
        })
        .collect()
}
