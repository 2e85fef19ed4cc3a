//! Readers (and matching writers) for tracker feature exports, manual FACS
//! coding, PSPI label files and the dataset manifest.
//!
//! All numeric parsing goes through `str::parse::<f64>`, which only accepts
//! `.` as the decimal separator, so results do not depend on the host locale.

mod features;
mod manifest;
mod manual;
mod pspi;
mod schema;

use std::path::PathBuf;

use thiserror::Error;

pub use features::{parse_feature_csv, read_feature_csv, write_feature_csv};
pub use manifest::{load_dataset, load_manifest, LoadOptions, LoadedDataset};
pub use manual::{
    merge_au_source, parse_manual_au_file, read_manual_au, write_manual_au, ManualAuMap,
};
pub use pspi::{compute_pspi, parse_pspi_file, read_pspi, write_pspi};
pub use schema::FeatureCsvSchema;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed CSV: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: schema error: column '{column}' not found in header")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: schema error: column '{column}' appears more than once in header")]
    DuplicateColumn { path: PathBuf, column: String },
    #[error("{path}: schema error: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: line {line}, column '{column}': cannot parse '{value}'")]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{path}: file has no data")]
    EmptyInput { path: PathBuf },
    #[error("{path}: line {line}: duplicate entry for frame {frame}, AU{au}")]
    DuplicateEntry {
        path: PathBuf,
        line: u64,
        frame: u32,
        au: u8,
    },
    #[error("{path}: line {line}: PSPI value {value} outside [0, 16]")]
    PspiRange { path: PathBuf, line: u64, value: f64 },
    #[error("manual AU coding has no entries for frame {frame}")]
    Coverage { frame: u32 },
    #[error("frame {frame}: AU{au} required but absent")]
    MissingAu { frame: u32, au: u8 },
    #[error("sequence {subject}/{sequence}: manual AU source requested but no manual_au_file_path given")]
    MissingManualCoding { subject: String, sequence: String },
    #[error("{path}: manifest error: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<IngestError>,
    },
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        IngestError::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_context(self, context: impl Into<String>) -> Self {
        IngestError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
