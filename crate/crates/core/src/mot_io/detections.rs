use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// One detector output in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// 1-based frame number.
    pub frame: u32,
    pub bbox: BBox,
    pub confidence: f64,
    /// Unit-length appearance vector, when a sidecar was attached.
    pub embedding: Option<Vec<f32>>,
    /// Position of this row among all rows of its frame in the source file,
    /// counted before confidence filtering. Embedding sidecars key on it.
    pub source_index: usize,
}

impl Detection {
    pub fn new(frame: u32, bbox: BBox, confidence: f64) -> Self {
        Self {
            frame,
            bbox,
            confidence,
            embedding: None,
            source_index: 0,
        }
    }

    pub fn with_embedding(mut self, embedding: Vec<f32>) -> Self {
        self.embedding = Some(embedding);
        self
    }
}

/// Detections grouped by frame, covering frames `1..=num_frames()`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSet {
    frames: Vec<Vec<Detection>>,
    /// Row count per frame before filtering.
    raw_counts: Vec<usize>,
}

impl DetectionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from per-frame lists; `frames[0]` is frame 1.
    pub fn from_frames(frames: Vec<Vec<Detection>>) -> Self {
        let raw_counts = frames.iter().map(Vec::len).collect();
        let mut set = Self { frames, raw_counts };
        for (i, dets) in set.frames.iter_mut().enumerate() {
            for (j, d) in dets.iter_mut().enumerate() {
                d.frame = i as u32 + 1;
                d.source_index = j;
            }
        }
        set
    }

    pub fn num_frames(&self) -> u32 {
        self.frames.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Detections of a 1-based frame; empty for frames outside the set.
    pub fn frame(&self, frame: u32) -> &[Detection] {
        frame
            .checked_sub(1)
            .and_then(|i| self.frames.get(i as usize))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn frame_mut(&mut self, frame: u32) -> Option<&mut Vec<Detection>> {
        frame
            .checked_sub(1)
            .and_then(|i| self.frames.get_mut(i as usize))
    }

    pub(crate) fn raw_count(&self, frame: u32) -> Option<usize> {
        frame
            .checked_sub(1)
            .and_then(|i| self.raw_counts.get(i as usize))
            .copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[Detection])> {
        self.frames
            .iter()
            .enumerate()
            .map(|(i, d)| (i as u32 + 1, d.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    fn ensure_frame(&mut self, frame: u32) {
        let needed = frame as usize;
        if self.frames.len() < needed {
            self.frames.resize_with(needed, Vec::new);
            self.raw_counts.resize(needed, 0);
        }
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, what: &str, path: &Path, line: usize) -> Result<T> {
    field.trim().parse::<T>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("invalid {what} `{}`", field.trim()),
    })
}

/// Parses MOT detection rows from text. `path` is used for diagnostics only.
pub fn read_detections(text: &str, path: &Path, min_confidence: f64) -> Result<DetectionSet> {
    let mut set = DetectionSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected 10 fields, found {}", fields.len()),
            });
        }
        let frame: i64 = parse_field(fields[0], "frame", path, line)?;
        if frame <= 0 || frame > u32::MAX as i64 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("frame must be positive, got {frame}"),
            });
        }
        let _id: f64 = parse_field(fields[1], "id", path, line)?;
        let mut nums = [0.0f64; 5];
        for (k, name) in ["left", "top", "width", "height", "confidence"].iter().enumerate() {
            nums[k] = parse_field(fields[2 + k], name, path, line)?;
        }
        for (k, name) in ["x", "y", "z"].iter().enumerate() {
            let _: f64 = parse_field(fields[7 + k], name, path, line)?;
        }
        let [left, top, width, height, confidence] = nums;
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("box size must be positive, got {width}x{height}"),
            });
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("confidence must lie in [0, 1], got {confidence}"),
            });
        }
        let frame = frame as u32;
        set.ensure_frame(frame);
        let slot = (frame - 1) as usize;
        let source_index = set.raw_counts[slot];
        set.raw_counts[slot] += 1;
        if confidence < min_confidence {
            continue;
        }
        set.frames[slot].push(Detection {
            frame,
            bbox: BBox::new(left, top, width, height),
            confidence,
            embedding: None,
            source_index,
        });
    }
    Ok(set)
}

/// Renders detections as MOT detection rows in frame order.
pub fn format_detections(set: &DetectionSet) -> String {
    let mut out = String::new();
    for (frame, dets) in set.iter() {
        for d in dets {
            let b = &d.bbox;
            let _ = writeln!(
                out,
                "{frame},-1,{:.2},{:.2},{:.2},{:.2},{:.4},-1,-1,-1",
                b.left, b.top, b.width, b.height, d.confidence
            );
        }
    }
    out
}

/// Reads a MOT detection file, dropping rows below `min_confidence`.
pub fn parse_detections(path: &Path, min_confidence: f64) -> Result<DetectionSet> {
    let text = super::read_to_string(path)?;
    read_detections(&text, path, min_confidence)
}
