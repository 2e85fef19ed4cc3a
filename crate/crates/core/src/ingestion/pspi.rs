use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::IngestError;
use crate::model::{FrameFeatures, PSPI_MAX};

/// Reads frame-level PSPI values: either one number per line, or a CSV with a
/// `pspi` column. Blank lines are ignored.
pub fn parse_pspi_file(path: &Path) -> Result<Vec<f64>, IngestError> {
    let file = fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_pspi(file, path)
}

pub fn read_pspi<R: Read>(mut reader: R, origin: &Path) -> Result<Vec<f64>, IngestError> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| IngestError::io(origin, e))?;

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    let mut column = 0;
    let mut column_name = "pspi".to_string();
    if let Some(&(_, first)) = lines.peek() {
        let cells: Vec<&str> = first.split(',').map(str::trim).collect();
        if cells[0].parse::<f64>().is_err() {
            if let Some(pos) = cells.iter().position(|c| c.eq_ignore_ascii_case("pspi")) {
                column = pos;
                column_name = cells[pos].to_string();
                lines.next();
            }
        }
    }

    let mut values = Vec::new();
    for (line, content) in lines {
        let raw = content.split(',').nth(column).unwrap_or("").trim();
        let value: f64 = raw.parse().map_err(|_| IngestError::Parse {
            path: origin.to_path_buf(),
            line,
            column: column_name.clone(),
            value: raw.to_string(),
        })?;
        if !(0.0..=PSPI_MAX).contains(&value) {
            return Err(IngestError::PspiRange {
                path: origin.to_path_buf(),
                line,
                value,
            });
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(IngestError::EmptyInput {
            path: origin.to_path_buf(),
        });
    }
    Ok(values)
}

pub fn write_pspi<W: Write>(mut writer: W, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        writeln!(writer, "{v}")?;
    }
    Ok(())
}

/// Prkachin-Solomon pain intensity from AU levels:
/// `AU4 + max(AU6, AU7) + max(AU9, AU10) + AU43`, with AU43 (eye closure)
/// treated as binary.
pub fn compute_pspi(frame: &FrameFeatures) -> Result<f64, IngestError> {
    let au = |id: u8| {
        frame
            .au_intensities
            .get(&id)
            .copied()
            .ok_or(IngestError::MissingAu {
                frame: frame.frame_index,
                au: id,
            })
    };
    let eye_closure = if au(43)? > 0.0 { 1.0 } else { 0.0 };
    Ok(au(4)? + au(6)?.max(au(7)?) + au(9)?.max(au(10)?) + eye_closure)
}
