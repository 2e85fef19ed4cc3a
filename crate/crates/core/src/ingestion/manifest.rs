use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{merge_au_source, parse_feature_csv, parse_manual_au_file, parse_pspi_file};
use super::{FeatureCsvSchema, IngestError};
use crate::model::{
    validate_sequence, AuProfile, AuSource, DatasetManifest, Finding, ManifestEntry, SequenceKey,
    SequenceRecord,
};

/// Reads and checks a JSON manifest (`{"entries": [...]}`).
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|source| IngestError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    manifest.check_unique().map_err(|e| IngestError::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub schema: FeatureCsvSchema,
    pub au_source: AuSource,
    /// AUs to take from manual coding. `None` takes every coded AU.
    pub profile: Option<AuProfile>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            schema: FeatureCsvSchema::default(),
            au_source: AuSource::Manual,
            profile: Some(AuProfile::pain()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    /// In manifest order.
    pub records: Vec<SequenceRecord>,
    /// Soft invariant violations; they do not stop loading.
    pub findings: Vec<(SequenceKey, Finding)>,
    /// Every file read, in manifest order.
    pub input_files: Vec<PathBuf>,
    /// AU ids coded in any manual coding file (empty in predicted mode).
    pub manual_au_ids: BTreeSet<u8>,
}

impl LoadedDataset {
    /// AU ids present in any frame of any record.
    pub fn au_ids(&self) -> BTreeSet<u8> {
        self.records
            .iter()
            .flat_map(|r| r.frames.iter())
            .flat_map(|f| f.au_intensities.keys().copied())
            .collect()
    }
}

fn load_entry(
    entry: &ManifestEntry,
    base_dir: &Path,
    opts: &LoadOptions,
) -> Result<(SequenceRecord, Vec<PathBuf>, BTreeSet<u8>), IngestError> {
    let context = format!("sequence {}/{}", entry.subject_id, entry.sequence_id);
    let wrap = |e: IngestError| e.in_context(context.clone());

    let feature_path = base_dir.join(&entry.feature_file_path);
    let mut files = vec![feature_path.clone()];
    let mut frames = parse_feature_csv(&feature_path, &opts.schema).map_err(wrap)?;
    let mut manual_aus = BTreeSet::new();

    if opts.au_source == AuSource::Manual {
        let manual_rel = entry
            .manual_au_file_path
            .as_ref()
            .ok_or_else(|| IngestError::MissingManualCoding {
                subject: entry.subject_id.clone(),
                sequence: entry.sequence_id.clone(),
            })?;
        let manual_path = base_dir.join(manual_rel);
        let manual = parse_manual_au_file(&manual_path).map_err(wrap)?;
        manual_aus.extend(manual.values().flat_map(|aus| aus.keys().copied()));
        frames = merge_au_source(frames, &manual, AuSource::Manual, opts.profile.as_ref()).map_err(wrap)?;
        files.push(manual_path);
    }

    let pspi = match &entry.pspi_file_path {
        Some(rel) => {
            let path = base_dir.join(rel);
            let values = parse_pspi_file(&path).map_err(wrap)?;
            files.push(path);
            Some(values)
        }
        None => None,
    };

    Ok((
        SequenceRecord {
            subject_id: entry.subject_id.clone(),
            sequence_id: entry.sequence_id.clone(),
            frames,
            pspi,
            labels: entry.labels,
            gender: entry.gender,
        },
        files,
        manual_aus,
    ))
}

/// Loads every sequence in the manifest. Relative paths resolve against
/// `base_dir` (normally the manifest's directory). Files are parsed in
/// parallel; results and the reported error are in manifest order.
pub fn load_dataset(
    manifest: &DatasetManifest,
    base_dir: &Path,
    opts: &LoadOptions,
) -> Result<LoadedDataset, IngestError> {
    manifest.check_unique().map_err(|e| IngestError::Manifest {
        path: base_dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let loaded: Vec<Result<(SequenceRecord, Vec<PathBuf>, BTreeSet<u8>), IngestError>> = manifest
        .entries
        .par_iter()
        .map(|entry| load_entry(entry, base_dir, opts))
        .collect();

    let mut dataset = LoadedDataset {
        records: Vec::with_capacity(loaded.len()),
        findings: Vec::new(),
        input_files: Vec::new(),
        manual_au_ids: BTreeSet::new(),
    };
    for result in loaded {
        let (record, files, manual_aus) = result?;
        dataset.manual_au_ids.extend(manual_aus);
        let key = record.key();
        dataset
            .findings
            .extend(validate_sequence(&record).into_iter().map(|f| (key.clone(), f)));
        dataset.records.push(record);
        dataset.input_files.extend(files);
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Gender, Labels};

    fn write_sequence(dir: &Path, name: &str, frames: u32) {
        let schema = FeatureCsvSchema::toolkit_export(68);
        let data: Vec<_> = (1..=frames)
            .map(|i| {
                let mut f = crate::model::FrameFeatures::zeroed(i, 68);
                f.au_intensities.insert(4, 0.5);
                f
            })
            .collect();
        let mut buf = Vec::new();
        super::super::write_feature_csv(&mut buf, &data, &schema).unwrap();
        fs::write(dir.join(format!("{name}.csv")), buf).unwrap();
        let manual: String = (1..=frames).map(|i| format!("{i},4,B\n")).collect();
        fs::write(dir.join(format!("{name}_au.csv")), format!("frame,au,level\n{manual}")).unwrap();
        let pspi: String = (1..=frames).map(|_| "0\n").collect();
        fs::write(dir.join(format!("{name}_pspi.txt")), pspi).unwrap();
    }

    fn manifest_json(entries: &[(&str, &str, &str)]) -> String {
        let items: Vec<String> = entries
            .iter()
            .map(|(s, q, f)| {
                format!(
                    r#"{{"subject_id": "{s}", "sequence_id": "{q}", "feature_file_path": "{f}.csv",
                        "pspi_file_path": "{f}_pspi.txt", "manual_au_file_path": "{f}_au.csv",
                        "labels": {{"vas": 2, "sen": 1, "aff": 0, "opi": 1}}, "gender": "male"}}"#
                )
            })
            .collect();
        format!(r#"{{"entries": [{}]}}"#, items.join(","))
    }

    #[test]
    fn one_entry_loads_one_record() {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(dir.path(), "a", 3);
        let path = dir.path().join("m.json");
        fs::write(&path, manifest_json(&[("s1", "q1", "a")])).unwrap();
        let manifest = load_manifest(&path).unwrap();
        let ds = load_dataset(&manifest, dir.path(), &LoadOptions::default()).unwrap();
        assert_eq!(ds.records.len(), 1);
        let rec = &ds.records[0];
        assert_eq!(rec.frames.len(), 3);
        assert_eq!(rec.frames[0].au_intensities[&4], 2.0);
        assert_eq!(rec.pspi.as_ref().unwrap().len(), 3);
        assert_eq!(rec.labels, Some(Labels { vas: 2, sen: 1, aff: 0, opi: 1 }));
        assert_eq!(rec.gender, Some(Gender::Male));
        assert!(ds.findings.is_empty());
        assert_eq!(ds.input_files.len(), 3);
    }

    #[test]
    fn duplicate_keys_are_a_manifest_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, manifest_json(&[("s1", "q1", "a"), ("s1", "q1", "b")])).unwrap();
        assert!(matches!(load_manifest(&path), Err(IngestError::Manifest { .. })));
    }

    #[test]
    fn missing_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, manifest_json(&[("s1", "q1", "nope")])).unwrap();
        let manifest = load_manifest(&path).unwrap();
        let err = load_dataset(&manifest, dir.path(), &LoadOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nope.csv"), "{msg}");
        assert!(msg.contains("s1/q1"), "{msg}");
    }

    #[test]
    fn soft_findings_do_not_fail_loading() {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(dir.path(), "a", 3);
        fs::write(dir.path().join("a_pspi.txt"), "0\n0\n").unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, manifest_json(&[("s1", "q1", "a")])).unwrap();
        let ds = load_dataset(&load_manifest(&path).unwrap(), dir.path(), &LoadOptions::default()).unwrap();
        assert_eq!(ds.findings.len(), 1);
        assert_eq!(ds.findings[0].1.field, "pspi");
    }
}
