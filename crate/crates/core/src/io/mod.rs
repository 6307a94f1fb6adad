//! File formats: datasets, checkpoints, key=value configs and reports.

mod checkpoint;
mod config;
mod dataset;
mod report;

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use config::{KvConfig, RunConfig};
pub use report::{
    config_entries, history_csv, long_csv, to_json, AggregateRow, ConfigEntry, DatasetFingerprint, RunManifest,
    TrainReport,
};
pub use dataset::{
    format_row, parse_rows, read_truth, write_dataset, write_truth, DatasetReader, Payload, RawRow,
};

use crate::data::DatasetBundle;
use crate::error::{Error, Result};

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of an in-memory bundle (canonical JSON).
pub fn bundle_fingerprint(bundle: &DatasetBundle) -> String {
    let json = serde_json::to_vec(bundle).expect("bundle serializes");
    sha256_hex(&json)
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })
}
