use std::collections::HashSet;
use std::path::Path;

use super::DetectionSet;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EMB1";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

/// One sidecar record. `index` is the detection's row position within its
/// frame in the detection file, before any confidence filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub frame: u32,
    pub index: u32,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub dim: u32,
    pub records: Vec<EmbeddingRecord>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Option<[u8; N]> {
        let end = self.pos.checked_add(N)?;
        let out = self.bytes.get(self.pos..end)?.try_into().ok()?;
        self.pos = end;
        Some(out)
    }
}

/// Decodes an `EMB1` sidecar.
pub fn read_embeddings(bytes: &[u8]) -> Result<EmbeddingFile> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("embedding file: bad magic".into()));
    }
    let mut cur = Cursor { bytes, pos: 4 };
    let version = u32::from_le_bytes(cur.take().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!(
            "embedding file: unsupported version {version}"
        )));
    }
    let dim = u32::from_le_bytes(cur.take().unwrap());
    if dim == 0 {
        return Err(Error::Format("embedding file: dimension is 0".into()));
    }
    let count = u64::from_le_bytes(cur.take().unwrap());
    let record_len = 8u64 + 4 * dim as u64;
    let body = (bytes.len() - HEADER_LEN) as u64;
    if count.checked_mul(record_len) != Some(body) {
        return Err(Error::Format(format!(
            "embedding file: header declares {count} records of {record_len} bytes, body holds {body} bytes"
        )));
    }
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let frame = u32::from_le_bytes(cur.take().unwrap());
        let index = u32::from_le_bytes(cur.take().unwrap());
        let vector = (0..dim)
            .map(|_| f32::from_le_bytes(cur.take().unwrap()))
            .collect();
        records.push(EmbeddingRecord {
            frame,
            index,
            vector,
        });
    }
    Ok(EmbeddingFile { dim, records })
}

pub fn encode_embeddings(file: &EmbeddingFile) -> Result<Vec<u8>> {
    if file.dim == 0 {
        return Err(Error::Format("embedding file: dimension is 0".into()));
    }
    let mut out =
        Vec::with_capacity(HEADER_LEN + file.records.len() * (8 + 4 * file.dim as usize));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&file.dim.to_le_bytes());
    out.extend_from_slice(&(file.records.len() as u64).to_le_bytes());
    for r in &file.records {
        if r.vector.len() != file.dim as usize {
            return Err(Error::Format(format!(
                "record (frame {}, index {}) has {} values, expected {}",
                r.frame,
                r.index,
                r.vector.len(),
                file.dim
            )));
        }
        out.extend_from_slice(&r.frame.to_le_bytes());
        out.extend_from_slice(&r.index.to_le_bytes());
        for v in &r.vector {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn normalize_embedding(v: &[f32]) -> Option<Vec<f32>> {
    let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return None;
    }
    Some(v.iter().map(|&x| (x as f64 / norm) as f32).collect())
}

/// Attaches sidecar vectors to the surviving detections, re-normalised to
/// unit length. Records for rows removed by confidence filtering are skipped.
/// With `require_all`, every detection must receive a vector.
pub fn attach_embeddings(
    set: &mut DetectionSet,
    file: &EmbeddingFile,
    require_all: bool,
) -> Result<()> {
    let mut seen = HashSet::new();
    for r in &file.records {
        let exists = set
            .raw_count(r.frame)
            .is_some_and(|n| (r.index as usize) < n);
        if !exists {
            return Err(Error::Consistency(format!(
                "embedding record references frame {}, index {} which is not in the detection file",
                r.frame, r.index
            )));
        }
        if !seen.insert((r.frame, r.index)) {
            return Err(Error::Consistency(format!(
                "duplicate embedding record for frame {}, index {}",
                r.frame, r.index
            )));
        }
        let dets = set.frame_mut(r.frame).expect("frame checked above");
        let Some(det) = dets.iter_mut().find(|d| d.source_index == r.index as usize) else {
            continue;
        };
        let unit = normalize_embedding(&r.vector).ok_or_else(|| {
            Error::Consistency(format!(
                "embedding for frame {}, index {} has zero or non-finite norm",
                r.frame, r.index
            ))
        })?;
        det.embedding = Some(unit);
    }
    if require_all {
        for (frame, dets) in set.iter() {
            if let Some(d) = dets.iter().find(|d| d.embedding.is_none()) {
                return Err(Error::MissingEmbedding {
                    frame,
                    index: d.source_index,
                });
            }
        }
    }
    Ok(())
}

/// Reads an `EMB1` sidecar and attaches it to `set`.
pub fn parse_embeddings(path: &Path, set: &mut DetectionSet, require_all: bool) -> Result<()> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let file = read_embeddings(&bytes)?;
    attach_embeddings(set, &file, require_all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mot_io::read_detections;

    fn dets() -> DetectionSet {
        read_detections(
            "1,-1,10,20,30,60,0.9,-1,-1,-1\n1,-1,50,20,30,60,0.3,-1,-1,-1\n",
            Path::new("d"),
            0.6,
        )
        .unwrap()
    }

    fn file(records: Vec<EmbeddingRecord>) -> EmbeddingFile {
        EmbeddingFile { dim: 4, records }
    }

    #[test]
    fn attaches_normalized_vector() {
        let mut set = dets();
        let f = file(vec![EmbeddingRecord {
            frame: 1,
            index: 0,
            vector: vec![2.0, 0.0, 0.0, 0.0],
        }]);
        let bytes = encode_embeddings(&f).unwrap();
        let decoded = read_embeddings(&bytes).unwrap();
        attach_embeddings(&mut set, &decoded, true).unwrap();
        assert_eq!(set.frame(1)[0].embedding.as_deref(), Some(&[1.0, 0.0, 0.0, 0.0][..]));
        assert_eq!(set.frame(1)[0].bbox.left, 10.0);
    }

    #[test]
    fn filtered_rows_are_skipped() {
        let mut set = dets();
        let f = file(vec![
            EmbeddingRecord { frame: 1, index: 0, vector: vec![0.0, 1.0, 0.0, 0.0] },
            EmbeddingRecord { frame: 1, index: 1, vector: vec![1.0, 0.0, 0.0, 0.0] },
        ]);
        attach_embeddings(&mut set, &f, true).unwrap();
        assert_eq!(set.frame(1).len(), 1);
    }

    #[test]
    fn nonexistent_reference_is_consistency_error() {
        let mut set = dets();
        let f = file(vec![EmbeddingRecord { frame: 1, index: 2, vector: vec![1.0; 4] }]);
        assert!(matches!(
            attach_embeddings(&mut set, &f, false),
            Err(Error::Consistency(_))
        ));
        let f = file(vec![EmbeddingRecord { frame: 7, index: 0, vector: vec![1.0; 4] }]);
        assert!(matches!(
            attach_embeddings(&mut set, &f, false),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn missing_embedding_only_when_required() {
        let mut set = dets();
        let f = file(vec![]);
        attach_embeddings(&mut set, &f, false).unwrap();
        assert!(matches!(
            attach_embeddings(&mut set, &f, true),
            Err(Error::MissingEmbedding { frame: 1, index: 0 })
        ));
    }

    #[test]
    fn header_errors() {
        let good = encode_embeddings(&file(vec![EmbeddingRecord {
            frame: 1,
            index: 0,
            vector: vec![1.0; 4],
        }]))
        .unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_embeddings(&bad_magic), Err(Error::Format(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(read_embeddings(&bad_version), Err(Error::Format(_))));

        let mut zero_dim = good.clone();
        zero_dim[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(read_embeddings(&zero_dim), Err(Error::Format(_))));

        let mut wrong_count = good.clone();
        wrong_count[12..20].copy_from_slice(&2u64.to_le_bytes());
        assert!(matches!(read_embeddings(&wrong_count), Err(Error::Format(_))));

        let truncated = &good[..good.len() - 3];
        assert!(matches!(read_embeddings(truncated), Err(Error::Format(_))));
    }
}
