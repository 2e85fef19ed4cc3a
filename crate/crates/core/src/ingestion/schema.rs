use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::model::DEFAULT_LANDMARK_COUNT;

/// Binds semantic feature slots to CSV column names.
///
/// The default follows the facial-behaviour toolkit 2.x export layout
/// (`frame`, `success`, `x_0..x_67`, `y_0..y_67`, `pose_T*`, `pose_R*`,
/// `gaze_0_*`, `gaze_1_*`, `AUxx_r`). A JSON file may override any subset of
/// the fields; omitted fields keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureCsvSchema {
    pub frame: String,
    pub success: String,
    pub landmark_x: Vec<String>,
    pub landmark_y: Vec<String>,
    pub head_translation: [String; 3],
    pub head_rotation: [String; 3],
    pub gaze_left: [String; 3],
    pub gaze_right: [String; 3],
    /// Explicit AU id to column bindings. When `None`, every header column
    /// named `AU<digits>_r` is bound to its AU id.
    pub au_columns: Option<BTreeMap<u8, String>>,
}

impl Default for FeatureCsvSchema {
    fn default() -> Self {
        Self::toolkit_export(DEFAULT_LANDMARK_COUNT)
    }
}

fn triple(prefix: &str) -> [String; 3] {
    ["x", "y", "z"].map(|axis| format!("{prefix}{axis}"))
}

impl FeatureCsvSchema {
    pub fn toolkit_export(n_landmarks: usize) -> Self {
        Self {
            frame: "frame".into(),
            success: "success".into(),
            landmark_x: (0..n_landmarks).map(|i| format!("x_{i}")).collect(),
            landmark_y: (0..n_landmarks).map(|i| format!("y_{i}")).collect(),
            head_translation: ["pose_Tx", "pose_Ty", "pose_Tz"].map(String::from),
            head_rotation: ["pose_Rx", "pose_Ry", "pose_Rz"].map(String::from),
            gaze_left: triple("gaze_0_"),
            gaze_right: triple("gaze_1_"),
            au_columns: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        let schema: Self = serde_json::from_str(&text).map_err(|source| IngestError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if schema.landmark_x.len() != schema.landmark_y.len() {
            return Err(IngestError::Schema {
                path: path.to_path_buf(),
                message: format!(
                    "{} landmark x columns but {} y columns",
                    schema.landmark_x.len(),
                    schema.landmark_y.len()
                ),
            });
        }
        Ok(schema)
    }

    pub fn n_landmarks(&self) -> usize {
        self.landmark_x.len()
    }

    /// Every non-AU column name, in output order.
    pub(crate) fn fixed_columns(&self) -> Vec<&str> {
        let mut cols = vec![self.frame.as_str(), self.success.as_str()];
        cols.extend(self.landmark_x.iter().map(String::as_str));
        cols.extend(self.landmark_y.iter().map(String::as_str));
        for group in [
            &self.head_translation,
            &self.head_rotation,
            &self.gaze_left,
            &self.gaze_right,
        ] {
            cols.extend(group.iter().map(String::as_str));
        }
        cols
    }
}

/// Parses a toolkit-style AU intensity column name such as `AU04_r`.
pub(crate) fn au_id_from_column(name: &str) -> Option<u8> {
    let digits = name.strip_prefix("AU")?.strip_suffix("_r")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub(crate) fn au_column_name(au: u8) -> String {
    format!("AU{au:02}_r")
}
