//! Raw recordings on disk: little-endian `f32`, channel-major, plus a JSON
//! header `{fs, channel_labels, n_samples}` with an optional class `label`.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Recording;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingHeader {
    pub fs: f64,
    pub channel_labels: Vec<String>,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

pub fn read_header(header_path: &Path) -> Result<RecordingHeader> {
    let text = fs::read_to_string(header_path).map_err(|e| Error::from(e).at_path(header_path))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).at_path(header_path))
}

pub fn read_recording(bin_path: &Path, header_path: &Path) -> Result<Recording> {
    let header = read_header(header_path)?;
    let bytes = fs::read(bin_path).map_err(|e| Error::from(e).at_path(bin_path))?;
    let n_ch = header.channel_labels.len();
    let expected = n_ch * header.n_samples * 4;
    if bytes.len() != expected {
        return Err(Error::Recording(format!(
            "expected {expected} bytes for {n_ch} channels x {} samples, found {}",
            header.n_samples,
            bytes.len()
        ))
        .at_path(bin_path));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let data = Array2::from_shape_vec((n_ch, header.n_samples), values)
        .map_err(|e| Error::Shape(e.to_string()).at_path(bin_path))?;
    Recording::new(data, header.fs, header.channel_labels).map_err(|e| e.at_path(header_path))
}

/// Samples are narrowed to `f32` on write.
pub fn write_recording(rec: &Recording, label: Option<u8>, bin_path: &Path, header_path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(rec.n_channels() * rec.n_samples() * 4);
    for v in rec.data().iter() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(bin_path, bytes).map_err(|e| Error::from(e).at_path(bin_path))?;
    let header = RecordingHeader {
        fs: rec.fs(),
        channel_labels: rec.labels().to_vec(),
        n_samples: rec.n_samples(),
        label,
    };
    fs::write(header_path, serde_json::to_string_pretty(&header)?)
        .map_err(|e| Error::from(e).at_path(header_path))?;
    Ok(())
}
