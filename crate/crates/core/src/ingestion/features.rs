use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::schema::{au_column_name, au_id_from_column};
use super::{FeatureCsvSchema, IngestError};
use crate::model::{FrameFeatures, AU_LEVEL_MAX};

/// Reads a tracker feature export. One [`FrameFeatures`] per data row, in
/// file order. AU intensities are clamped to [0, 5].
pub fn parse_feature_csv(path: &Path, schema: &FeatureCsvSchema) -> Result<Vec<FrameFeatures>, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_feature_csv(file, schema, path)
}

struct Bindings {
    frame: usize,
    success: usize,
    landmark_x: Vec<usize>,
    landmark_y: Vec<usize>,
    head_translation: [usize; 3],
    head_rotation: [usize; 3],
    gaze_left: [usize; 3],
    gaze_right: [usize; 3],
    aus: Vec<(u8, usize)>,
}

fn bind(header: &csv::StringRecord, schema: &FeatureCsvSchema, origin: &Path) -> Result<Bindings, IngestError> {
    let mut positions: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        positions.entry(name).or_default().push(i);
    }
    let find = |column: &str| -> Result<usize, IngestError> {
        match positions.get(column).map(Vec::as_slice) {
            Some([only]) => Ok(*only),
            Some(_) => Err(IngestError::DuplicateColumn {
                path: origin.to_path_buf(),
                column: column.to_string(),
            }),
            None => Err(IngestError::MissingColumn {
                path: origin.to_path_buf(),
                column: column.to_string(),
            }),
        }
    };
    let triple = |cols: &[String; 3]| -> Result<[usize; 3], IngestError> {
        Ok([find(&cols[0])?, find(&cols[1])?, find(&cols[2])?])
    };
    if schema.landmark_x.len() != schema.landmark_y.len() {
        return Err(IngestError::Schema {
            path: origin.to_path_buf(),
            message: "landmark x and y column lists differ in length".into(),
        });
    }

    let aus = match &schema.au_columns {
        Some(explicit) => explicit
            .iter()
            .map(|(&au, col)| Ok((au, find(col)?)))
            .collect::<Result<Vec<_>, IngestError>>()?,
        None => {
            let mut discovered = Vec::new();
            for (i, name) in header.iter().enumerate() {
                if let Some(au) = au_id_from_column(name) {
                    find(name)?;
                    discovered.push((au, i));
                }
            }
            discovered.sort_unstable();
            if let Some(pair) = discovered.windows(2).find(|p| p[0].0 == p[1].0) {
                return Err(IngestError::DuplicateColumn {
                    path: origin.to_path_buf(),
                    column: au_column_name(pair[0].0),
                });
            }
            discovered
        }
    };

    Ok(Bindings {
        frame: find(&schema.frame)?,
        success: find(&schema.success)?,
        landmark_x: schema.landmark_x.iter().map(|c| find(c)).collect::<Result<_, _>>()?,
        landmark_y: schema.landmark_y.iter().map(|c| find(c)).collect::<Result<_, _>>()?,
        head_translation: triple(&schema.head_translation)?,
        head_rotation: triple(&schema.head_rotation)?,
        gaze_left: triple(&schema.gaze_left)?,
        gaze_right: triple(&schema.gaze_right)?,
        aus,
    })
}

/// Same as [`parse_feature_csv`] over any reader; `origin` names the source in
/// error messages.
pub fn read_feature_csv<R: Read>(
    reader: R,
    schema: &FeatureCsvSchema,
    origin: &Path,
) -> Result<Vec<FrameFeatures>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| IngestError::csv(origin, e))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(IngestError::EmptyInput {
            path: origin.to_path_buf(),
        });
    }
    let b = bind(&header, schema, origin)?;

    let mut frames = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(|e| IngestError::csv(origin, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |idx: usize| -> Result<f64, IngestError> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse::<f64>().map_err(|_| IngestError::Parse {
                path: origin.to_path_buf(),
                line,
                column: header[idx].to_string(),
                value: raw.to_string(),
            })
        };
        let triple = |cols: [usize; 3]| -> Result<[f64; 3], IngestError> {
            Ok([cell(cols[0])?, cell(cols[1])?, cell(cols[2])?])
        };

        let frame_value = cell(b.frame)?;
        if frame_value.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&frame_value) {
            return Err(IngestError::Parse {
                path: origin.to_path_buf(),
                line,
                column: header[b.frame].to_string(),
                value: record.get(b.frame).unwrap_or("").to_string(),
            });
        }

        let landmarks = b
            .landmark_x
            .iter()
            .zip(&b.landmark_y)
            .map(|(&x, &y)| Ok([cell(x)?, cell(y)?]))
            .collect::<Result<Vec<_>, IngestError>>()?;

        let mut au_intensities = BTreeMap::new();
        for &(au, idx) in &b.aus {
            au_intensities.insert(au, cell(idx)?.clamp(0.0, AU_LEVEL_MAX));
        }

        frames.push(FrameFeatures {
            frame_index: frame_value as u32,
            landmarks,
            head_translation: triple(b.head_translation)?,
            head_rotation: triple(b.head_rotation)?,
            gaze_left: triple(b.gaze_left)?,
            gaze_right: triple(b.gaze_right)?,
            au_intensities,
            tracking_ok: cell(b.success)? != 0.0,
        });
    }

    if frames.is_empty() {
        return Err(IngestError::EmptyInput {
            path: origin.to_path_buf(),
        });
    }
    Ok(frames)
}

/// Writes frames in the layout described by `schema`. With auto-discovered AU
/// columns, every AU present in any frame gets an `AUxx_r` column; AUs absent
/// from a frame are written as 0.
pub fn write_feature_csv<W: Write>(
    writer: W,
    frames: &[FrameFeatures],
    schema: &FeatureCsvSchema,
) -> Result<(), csv::Error> {
    let au_columns: Vec<(u8, String)> = match &schema.au_columns {
        Some(explicit) => explicit.iter().map(|(&au, c)| (au, c.clone())).collect(),
        None => frames
            .iter()
            .flat_map(|f| f.au_intensities.keys().copied())
            .collect::<BTreeSet<u8>>()
            .into_iter()
            .map(|au| (au, au_column_name(au)))
            .collect(),
    };

    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = schema.fixed_columns();
    header.extend(au_columns.iter().map(|(_, c)| c.as_str()));
    wtr.write_record(&header)?;

    let n = schema.n_landmarks();
    for frame in frames {
        let mut row = Vec::with_capacity(header.len());
        row.push(frame.frame_index.to_string());
        row.push(if frame.tracking_ok { "1" } else { "0" }.to_string());
        for i in 0..n {
            row.push(frame.landmarks.get(i).map_or(0.0, |p| p[0]).to_string());
        }
        for i in 0..n {
            row.push(frame.landmarks.get(i).map_or(0.0, |p| p[1]).to_string());
        }
        for group in [
            frame.head_translation,
            frame.head_rotation,
            frame.gaze_left,
            frame.gaze_right,
        ] {
            row.extend(group.iter().map(f64::to_string));
        }
        for (au, _) in &au_columns {
            row.push(frame.au_intensities.get(au).copied().unwrap_or(0.0).to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_schema() -> FeatureCsvSchema {
        FeatureCsvSchema::toolkit_export(2)
    }

    const HEADER: &str = "frame, success, x_0, x_1, y_0, y_1, pose_Tx, pose_Ty, pose_Tz, pose_Rx, pose_Ry, pose_Rz, gaze_0_x, gaze_0_y, gaze_0_z, gaze_1_x, gaze_1_y, gaze_1_z, AU04_r, AU06_r";

    fn parse(text: &str) -> Result<Vec<FrameFeatures>, IngestError> {
        read_feature_csv(text.as_bytes(), &small_schema(), Path::new("mem.csv"))
    }

    #[test]
    fn all_zero_rows() {
        let zeros = vec!["0"; 18].join(",");
        let text = format!("{HEADER}\n1,1,{zeros}\n2,1,{zeros}\n");
        let frames = parse(&text).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1].frame_index, 2);
        assert!(frames.iter().all(|f| f.tracking_ok));
        assert_eq!(frames[0].landmarks, vec![[0.0, 0.0]; 2]);
        assert_eq!(frames[0].au_intensities[&4], 0.0);
        assert_eq!(frames[0].au_intensities[&6], 0.0);
    }

    #[test]
    fn au_overshoot_is_clamped() {
        let vals = vec!["0"; 16].join(",");
        let text = format!("{HEADER}\n1,1,{vals},5.3,-0.2\n");
        let frames = parse(&text).unwrap();
        assert_eq!(frames[0].au_intensities[&4], 5.0);
        assert_eq!(frames[0].au_intensities[&6], 0.0);
    }

    #[test]
    fn missing_gaze_column_is_named() {
        let header = HEADER.replace(" gaze_0_x,", "");
        let vals = vec!["0"; 17].join(",");
        let err = parse(&format!("{header}\n1,1,{vals}\n")).unwrap_err();
        match err {
            IngestError::MissingColumn { column, .. } => assert_eq!(column, "gaze_0_x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_names_line_and_column() {
        let vals = vec!["0"; 17].join(",");
        let err = parse(&format!("{HEADER}\n1,1,{vals},0\n2,1,oops,{vals}\n")).unwrap_err();
        match err {
            IngestError::Parse { line, column, value, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "x_0");
                assert_eq!(value, "oops");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_and_header_only() {
        assert!(matches!(parse(""), Err(IngestError::EmptyInput { .. })));
        assert!(matches!(parse(&format!("{HEADER}\n")), Err(IngestError::EmptyInput { .. })));
    }

    #[test]
    fn failed_tracking_rows_are_kept() {
        let vals = vec!["0"; 18].join(",");
        let frames = parse(&format!("{HEADER}\n1,0,{vals}\n")).unwrap();
        assert!(!frames[0].tracking_ok);
    }

    #[test]
    fn duplicate_bound_column_is_rejected() {
        let header = format!("{HEADER}, x_0");
        let vals = vec!["0"; 19].join(",");
        let err = parse(&format!("{header}\n1,1,{vals}\n")).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateColumn { column, .. } if column == "x_0"));
    }

    #[test]
    fn write_then_read_is_identity() {
        let mut frame = FrameFeatures::zeroed(3, 2);
        frame.landmarks = vec![[101.25, 88.5], [0.1, -3.0e-7]];
        frame.head_translation = [1.0, 2.0, 512.3];
        frame.head_rotation = [0.01, -0.2, 0.3];
        frame.gaze_left = [0.1, 0.2, -0.97];
        frame.gaze_right = [0.11, 0.21, -0.96];
        frame.au_intensities = [(4, 1.5), (6, 0.25)].into_iter().collect();
        let frames = vec![frame.clone(), FrameFeatures { frame_index: 4, tracking_ok: false, ..frame }];
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &frames, &small_schema()).unwrap();
        let back = read_feature_csv(buf.as_slice(), &small_schema(), Path::new("mem")).unwrap();
        assert_eq!(back, frames);
    }
}
