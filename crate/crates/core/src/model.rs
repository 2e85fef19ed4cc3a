//! Shared domain types for per-frame facial feature tracks and their scores.
//!
//! Everything here is a plain value type. Construction helpers validate the
//! invariants that can be checked locally; [`validate_sequence`] checks the
//! ones that span a whole sequence and reports them as findings rather than
//! failing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Index, IndexMut};
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Landmark count of the supported tracker export layout.
pub const DEFAULT_LANDMARK_COUNT: usize = 68;

/// Upper bound of an AU intensity level (FACS grade E).
pub const AU_LEVEL_MAX: f64 = 5.0;

/// Upper bound of a frame-level PSPI value.
pub const PSPI_MAX: f64 = 16.0;

/// FACS action units are numbered within this range.
pub const AU_ID_RANGE: std::ops::RangeInclusive<u8> = 1..=64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("AU id {0} is outside the FACS range 1..=64")]
    AuIdOutOfRange(u8),
    #[error("AU{au} level {level} is outside [0, 5]")]
    AuLevelOutOfRange { au: u8, level: f64 },
    #[error("AU profile '{0}' has no action units")]
    EmptyProfile(String),
    #[error("AU profile '{name}' lists AU{au} more than once")]
    DuplicateProfileAu { name: String, au: u8 },
    #[error("unknown AU profile '{0}' (expected pain, pain-predicted, happy or overall)")]
    UnknownProfile(String),
    #[error("unknown feature set '{0}' (expected one of L, Ho, Hr, Gl, Gr, I)")]
    UnknownFeatureSet(String),
    #[error("unknown gender '{0}'")]
    UnknownGender(String),
    #[error("duplicate manifest entry for subject '{subject}', sequence '{sequence}'")]
    DuplicateManifestEntry { subject: String, sequence: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("profile '{0}' contains AU43, which trackers do not predict; use it with manual AU coding only")]
    PredictedProfileHasAu43(String),
    #[error("at least one feature set must be enabled")]
    NoFeatureSets,
}

/// One FACS action unit intensity. Manual grades are stored numerically
/// (A=1 .. E=5, inactive 0); predicted intensities are continuous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuIntensity {
    pub au_id: u8,
    pub level: f64,
}

impl AuIntensity {
    pub fn new(au_id: u8, level: f64) -> Result<Self, ModelError> {
        if !AU_ID_RANGE.contains(&au_id) {
            return Err(ModelError::AuIdOutOfRange(au_id));
        }
        if !(0.0..=AU_LEVEL_MAX).contains(&level) {
            return Err(ModelError::AuLevelOutOfRange { au: au_id, level });
        }
        Ok(Self { au_id, level })
    }
}

/// The six multimodal feature sets whose frame-to-frame dynamics are tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    /// 2D facial landmarks.
    L,
    /// Head pose translation.
    Ho,
    /// Head pose rotation.
    Hr,
    /// Left eye gaze direction.
    Gl,
    /// Right eye gaze direction.
    Gr,
    /// Profile AU intensities.
    I,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 6] = [
        FeatureSet::L,
        FeatureSet::Ho,
        FeatureSet::Hr,
        FeatureSet::Gl,
        FeatureSet::Gr,
        FeatureSet::I,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::L => "L",
            FeatureSet::Ho => "Ho",
            FeatureSet::Hr => "Hr",
            FeatureSet::Gl => "Gl",
            FeatureSet::Gr => "Gr",
            FeatureSet::I => "I",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureSet::ALL
            .into_iter()
            .find(|fs| fs.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ModelError::UnknownFeatureSet(s.to_string()))
    }
}

/// A fixed-size table with one slot per [`FeatureSet`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerFeature<T>(pub [T; 6]);

impl<T: Copy> PerFeature<T> {
    pub fn splat(value: T) -> Self {
        PerFeature([value; 6])
    }
}

impl<T> PerFeature<T> {
    pub fn iter(&self) -> impl Iterator<Item = (FeatureSet, &T)> {
        FeatureSet::ALL.into_iter().zip(self.0.iter())
    }
}

impl<T> Index<FeatureSet> for PerFeature<T> {
    type Output = T;

    fn index(&self, fs: FeatureSet) -> &T {
        &self.0[fs.index()]
    }
}

impl<T> IndexMut<FeatureSet> for PerFeature<T> {
    fn index_mut(&mut self, fs: FeatureSet) -> &mut T {
        &mut self.0[fs.index()]
    }
}

/// One video frame's tracked features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    /// 1-based frame number as exported by the tracker.
    pub frame_index: u32,
    /// 2D landmark positions in pixels.
    pub landmarks: Vec<[f64; 2]>,
    /// Head translation in millimetres.
    pub head_translation: [f64; 3],
    /// Head rotation in radians.
    pub head_rotation: [f64; 3],
    pub gaze_left: [f64; 3],
    pub gaze_right: [f64; 3],
    /// AU id to intensity level in [0, 5].
    pub au_intensities: BTreeMap<u8, f64>,
    pub tracking_ok: bool,
}

impl FrameFeatures {
    /// A frame with `n_landmarks` zero landmarks, zero pose and gaze, and no AUs.
    pub fn zeroed(frame_index: u32, n_landmarks: usize) -> Self {
        Self {
            frame_index,
            landmarks: vec![[0.0; 2]; n_landmarks],
            head_translation: [0.0; 3],
            head_rotation: [0.0; 3],
            gaze_left: [0.0; 3],
            gaze_right: [0.0; 3],
            au_intensities: BTreeMap::new(),
            tracking_ok: true,
        }
    }

    fn tracked_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.landmarks
            .iter()
            .flat_map(|p| p.iter().copied())
            .chain(self.head_translation)
            .chain(self.head_rotation)
            .chain(self.gaze_left)
            .chain(self.gaze_right)
    }
}

/// A named, ordered set of action units. Ids are kept in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuProfile {
    pub name: String,
    pub au_ids: Vec<u8>,
}

impl AuProfile {
    pub fn new(name: impl Into<String>, au_ids: impl IntoIterator<Item = u8>) -> Result<Self, ModelError> {
        let name = name.into();
        let mut ids: Vec<u8> = au_ids.into_iter().collect();
        if ids.is_empty() {
            return Err(ModelError::EmptyProfile(name));
        }
        ids.sort_unstable();
        for pair in ids.windows(2) {
            if pair[0] == pair[1] {
                return Err(ModelError::DuplicateProfileAu { name, au: pair[0] });
            }
        }
        if let Some(&bad) = ids.iter().find(|id| !AU_ID_RANGE.contains(id)) {
            return Err(ModelError::AuIdOutOfRange(bad));
        }
        Ok(Self { name, au_ids: ids })
    }

    /// Pain-related AUs for manually coded intensities.
    pub fn pain() -> Self {
        Self::new("pain", [4, 6, 9, 10, 25, 43]).expect("built-in profile")
    }

    /// Pain-related AUs without AU43, which trackers do not predict.
    pub fn pain_predicted() -> Self {
        Self::new("pain-predicted", [4, 6, 9, 10, 25]).expect("built-in profile")
    }

    pub fn happy() -> Self {
        Self::new("happy", [6, 7, 12, 25, 26]).expect("built-in profile")
    }

    /// Every AU that appears in any of the given frames.
    pub fn overall<'a>(frames: impl IntoIterator<Item = &'a FrameFeatures>) -> Result<Self, ModelError> {
        let ids: BTreeSet<u8> = frames
            .into_iter()
            .flat_map(|f| f.au_intensities.keys().copied())
            .collect();
        Self::new("overall", ids)
    }

    /// Looks up a built-in profile. `overall` is data-dependent and is not
    /// resolved here.
    pub fn builtin(name: &str) -> Result<Self, ModelError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "pain" => Ok(Self::pain()),
            "pain-predicted" | "pain_predicted" => Ok(Self::pain_predicted()),
            "happy" => Ok(Self::happy()),
            _ => Err(ModelError::UnknownProfile(name.to_string())),
        }
    }

    pub fn len(&self) -> usize {
        self.au_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.au_ids.is_empty()
    }

    pub fn contains(&self, au: u8) -> bool {
        self.au_ids.binary_search(&au).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowOrientation {
    /// Window ends at the current frame (causal).
    #[default]
    Trailing,
    /// Window starts at the current frame and looks ahead.
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuSource {
    /// Manually coded FACS intensities replace the tracker's.
    #[default]
    Manual,
    /// Tracker-predicted intensities are used as exported.
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TedConfig {
    pub window: usize,
    pub window_orientation: WindowOrientation,
    pub profile: AuProfile,
    pub au_source: AuSource,
    pub feature_sets: BTreeSet<FeatureSet>,
}

impl Default for TedConfig {
    fn default() -> Self {
        Self {
            window: 10,
            window_orientation: WindowOrientation::Trailing,
            profile: AuProfile::pain(),
            au_source: AuSource::Manual,
            feature_sets: FeatureSet::ALL.into_iter().collect(),
        }
    }
}

impl TedConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.window == 0 {
            return Err(ConfigError::ZeroWindow);
        }
        if self.au_source == AuSource::Predicted && self.profile.contains(43) {
            return Err(ConfigError::PredictedProfileHasAu43(self.profile.name.clone()));
        }
        if self.feature_sets.is_empty() {
            return Err(ConfigError::NoFeatureSets);
        }
        Ok(())
    }

    pub fn is_enabled(&self, fs: FeatureSet) -> bool {
        self.feature_sets.contains(&fs)
    }
}

/// Scoring output for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFrame {
    pub frame_index: u32,
    /// Static score: sum of `exp(level)` over the profile AUs.
    pub static_score: f64,
    /// Windowed mean of the signed relative change, per feature set. Disabled
    /// sets hold the neutral factor 1.
    pub dynamics: PerFeature<f64>,
    /// Relative change against the previous frame (0 on the first frame).
    pub relative_change: PerFeature<f64>,
    /// Direction of change against the previous frame (+1 on the first frame).
    pub direction: PerFeature<i8>,
    pub ted_score: f64,
    pub tracking_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    #[default]
    Unspecified,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unspecified => "unspecified",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            "unspecified" | "" => Ok(Gender::Unspecified),
            _ => Err(ModelError::UnknownGender(s.to_string())),
        }
    }
}

/// Sequence-level subjective pain reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    /// Visual analog scale, 0..=10.
    pub vas: u8,
    /// Sensory scale, 0..=10.
    pub sen: u8,
    /// Affective scale, 0..=10.
    pub aff: u8,
    /// Observer pain intensity, 0..=5.
    pub opi: u8,
}

/// Identifies one sequence of one subject.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SequenceKey {
    pub subject_id: String,
    pub sequence_id: String,
}

impl SequenceKey {
    pub fn new(subject_id: impl Into<String>, sequence_id: impl Into<String>) -> Self {
        Self {
            subject_id: subject_id.into(),
            sequence_id: sequence_id.into(),
        }
    }
}

impl fmt::Display for SequenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.subject_id, self.sequence_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub subject_id: String,
    pub sequence_id: String,
    pub frames: Vec<FrameFeatures>,
    /// Frame-aligned PSPI values in [0, 16].
    pub pspi: Option<Vec<f64>>,
    pub labels: Option<Labels>,
    pub gender: Option<Gender>,
}

impl SequenceRecord {
    pub fn key(&self) -> SequenceKey {
        SequenceKey::new(&self.subject_id, &self.sequence_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub sequence_id: String,
    pub feature_file_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pspi_file_path: Option<PathBuf>,
    /// Manual FACS coding for this sequence; required when scoring with
    /// manually coded AUs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manual_au_file_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Labels>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
}

impl ManifestEntry {
    pub fn key(&self) -> SequenceKey {
        SequenceKey::new(&self.subject_id, &self.sequence_id)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn check_unique(&self) -> Result<(), ModelError> {
        let mut seen = BTreeSet::new();
        for entry in &self.entries {
            if !seen.insert(entry.key()) {
                return Err(ModelError::DuplicateManifestEntry {
                    subject: entry.subject_id.clone(),
                    sequence: entry.sequence_id.clone(),
                });
            }
        }
        Ok(())
    }
}

/// A violated invariant found by [`validate_sequence`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub frame_index: Option<u32>,
    pub field: String,
    pub message: String,
}

impl Finding {
    fn at(frame_index: u32, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            frame_index: Some(frame_index),
            field: field.into(),
            message: message.into(),
        }
    }

    fn sequence(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            frame_index: None,
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame_index {
            Some(frame) => write!(f, "frame {frame}, {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// Checks every sequence-level invariant and returns one finding per
/// violation. An empty result means the sequence is valid.
pub fn validate_sequence(seq: &SequenceRecord) -> Vec<Finding> {
    let mut findings = Vec::new();

    if seq.frames.is_empty() {
        findings.push(Finding::sequence("frames", "sequence has no frames"));
    }

    let expected_landmarks = seq.frames.first().map(|f| f.landmarks.len());
    let mut previous_index: Option<u32> = None;
    for frame in &seq.frames {
        let idx = frame.frame_index;
        if let Some(prev) = previous_index {
            if idx <= prev {
                findings.push(Finding::at(
                    idx,
                    "frame_index",
                    format!("frame index {idx} does not increase after {prev}"),
                ));
            }
        }
        previous_index = Some(idx);

        if let Some(expected) = expected_landmarks {
            if frame.landmarks.len() != expected {
                findings.push(Finding::at(
                    idx,
                    "landmarks",
                    format!("expected {expected} landmarks, found {}", frame.landmarks.len()),
                ));
            }
        }

        for (&au, &level) in &frame.au_intensities {
            if !AU_ID_RANGE.contains(&au) {
                findings.push(Finding::at(idx, format!("AU{au}"), "AU id outside 1..=64"));
            }
            if frame.tracking_ok && !(0.0..=AU_LEVEL_MAX).contains(&level) {
                findings.push(Finding::at(
                    idx,
                    format!("AU{au}"),
                    format!("level {level} outside [0, 5]"),
                ));
            }
        }

        if frame.tracking_ok && frame.tracked_values().any(|v| !v.is_finite()) {
            findings.push(Finding::at(idx, "features", "non-finite value in a tracked frame"));
        }
    }

    if let Some(pspi) = &seq.pspi {
        if pspi.len() != seq.frames.len() {
            findings.push(Finding::sequence(
                "pspi",
                format!("{} PSPI values for {} frames", pspi.len(), seq.frames.len()),
            ));
        }
        for (frame, &value) in seq.frames.iter().zip(pspi) {
            if !(0.0..=PSPI_MAX).contains(&value) {
                findings.push(Finding::at(
                    frame.frame_index,
                    "pspi",
                    format!("value {value} outside [0, 16]"),
                ));
            }
        }
    }

    if let Some(labels) = &seq.labels {
        for (name, value, max) in [
            ("labels.vas", labels.vas, 10),
            ("labels.sen", labels.sen, 10),
            ("labels.aff", labels.aff, 10),
            ("labels.opi", labels.opi, 5),
        ] {
            if value > max {
                findings.push(Finding::sequence(name, format!("value {value} outside 0..={max}")));
            }
        }
    }

    findings
}
