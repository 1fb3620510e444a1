//! Readers and writers for every on-disk format the toolkit consumes or emits.
//!
//! * MOT text rows `frame,id,left,top,width,height,conf,x,y,z` (detections, ground truth, results)
//! * `EMB1` little-endian embedding sidecars
//! * whitespace-separated per-frame affine warps
//! * `key = value` configuration files

mod config_file;
mod detections;
mod embeddings;
mod tracks;
mod warps;

pub use config_file::{parse_key_values, read_key_values, KeyValue};
pub use detections::{format_detections, parse_detections, read_detections, Detection, DetectionSet};
pub use embeddings::{
    attach_embeddings, encode_embeddings, normalize_embedding, parse_embeddings, read_embeddings, EmbeddingFile,
    EmbeddingRecord,
};
pub use tracks::{format_tracks, parse_tracks, read_tracks, write_tracks, TrackRecord};
pub use warps::{format_warps, parse_warps, read_warps, WarpMap, WarpMatrix};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
