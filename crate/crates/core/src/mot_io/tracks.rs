use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// One output row: an identity's box in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub frame: u32,
    pub id: u32,
    pub bbox: BBox,
    pub confidence: f64,
    /// Row was produced by gap filling rather than by the tracker. Not serialized.
    pub interpolated: bool,
}

impl TrackRecord {
    pub fn new(frame: u32, id: u32, bbox: BBox, confidence: f64) -> Self {
        Self {
            frame,
            id,
            bbox,
            confidence,
            interpolated: false,
        }
    }
}

/// Renders records as MOT result text. Records must be sorted by `(frame, id)`
/// with no duplicate pair.
pub fn format_tracks(records: &[TrackRecord]) -> Result<String> {
    for pair in records.windows(2) {
        let (a, b) = ((pair[0].frame, pair[0].id), (pair[1].frame, pair[1].id));
        if a == b {
            return Err(Error::Validation(format!(
                "duplicate record for frame {}, id {}",
                a.0, a.1
            )));
        }
        if a > b {
            return Err(Error::Validation(format!(
                "records not sorted by (frame, id): ({}, {}) precedes ({}, {})",
                a.0, a.1, b.0, b.1
            )));
        }
    }
    let mut out = String::with_capacity(records.len() * 48);
    for r in records {
        let b = &r.bbox;
        writeln!(
            out,
            "{},{},{:.2},{:.2},{:.2},{:.2},{:.2},-1,-1,-1",
            r.frame, r.id, b.left, b.top, b.width, b.height, r.confidence
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

pub fn write_tracks(path: &Path, records: &[TrackRecord]) -> Result<()> {
    let text = format_tracks(records)?;
    super::write_bytes(path, text.as_bytes())
}

/// Parses MOT result or ground-truth rows. Accepts 7 to 10 comma-separated
/// fields so third-party result files and 9-column ground truth both load.
pub fn read_tracks(text: &str, path: &Path) -> Result<Vec<TrackRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if !(7..=10).contains(&fields.len()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected 7 to 10 fields, found {}", fields.len()),
            });
        }
        let mut nums = [0.0f64; 7];
        for (k, f) in fields[..7].iter().enumerate() {
            nums[k] = f.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("invalid number `{f}`"),
            })?;
        }
        let [frame, id, left, top, width, height, conf] = nums;
        if frame < 1.0 || frame.fract() != 0.0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("frame must be a positive integer, got {frame}"),
            });
        }
        if id < 1.0 || id.fract() != 0.0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("id must be a positive integer, got {id}"),
            });
        }
        out.push(TrackRecord::new(
            frame as u32,
            id as u32,
            BBox::new(left, top, width, height),
            conf,
        ));
    }
    Ok(out)
}

pub fn parse_tracks(path: &Path) -> Result<Vec<TrackRecord>> {
    let text = super::read_to_string(path)?;
    read_tracks(&text, path)
}
