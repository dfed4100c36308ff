//! On-disk formats: sparse frames, NPY fixtures, AER recordings, weight
//! blobs and the JSON config/report schemas.

pub mod frame_file;
pub mod json_files;
pub mod npy;
pub mod weights_file;

use std::path::Path;

use anyhow::{Context, Result};
use esda_core::event::{parse_aer, AerFormat, Recording};

pub fn read_recording(path: &Path, format: AerFormat) -> Result<Recording> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_aer(&bytes, format).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}
