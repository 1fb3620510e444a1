use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Affine map from previous-frame to current-frame pixel coordinates:
/// `x' = a11 x + a12 y + a13`, `y' = a21 x + a22 y + a23`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpMatrix {
    pub frame: u32,
    pub affine: [[f64; 3]; 2],
}

impl WarpMatrix {
    pub const IDENTITY: [[f64; 3]; 2] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];

    pub fn identity(frame: u32) -> Self {
        Self {
            frame,
            affine: Self::IDENTITY,
        }
    }

    pub fn translation(frame: u32, dx: f64, dy: f64) -> Self {
        Self {
            frame,
            affine: [[1.0, 0.0, dx], [0.0, 1.0, dy]],
        }
    }

    pub fn new(frame: u32, affine: [[f64; 3]; 2]) -> Result<Self> {
        let w = Self { frame, affine };
        let det = w.determinant();
        if !det.is_finite() || det.abs() < 1e-12 || affine.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::Validation(format!(
                "warp for frame {frame} has a singular linear part"
            )));
        }
        Ok(w)
    }

    pub fn is_identity(&self) -> bool {
        self.affine == Self::IDENTITY
    }

    pub fn determinant(&self) -> f64 {
        let a = &self.affine;
        a[0][0] * a[1][1] - a[0][1] * a[1][0]
    }

    pub fn apply_point(&self, x: f64, y: f64) -> (f64, f64) {
        let a = &self.affine;
        (
            a[0][0] * x + a[0][1] * y + a[0][2],
            a[1][0] * x + a[1][1] * y + a[1][2],
        )
    }

    pub fn apply_vector(&self, x: f64, y: f64) -> (f64, f64) {
        let a = &self.affine;
        (a[0][0] * x + a[0][1] * y, a[1][0] * x + a[1][1] * y)
    }

    pub fn inverse(&self) -> Self {
        let a = &self.affine;
        let det = self.determinant();
        let (i11, i12) = (a[1][1] / det, -a[0][1] / det);
        let (i21, i22) = (-a[1][0] / det, a[0][0] / det);
        let tx = -(i11 * a[0][2] + i12 * a[1][2]);
        let ty = -(i21 * a[0][2] + i22 * a[1][2]);
        Self {
            frame: self.frame,
            affine: [[i11, i12, tx], [i21, i22, ty]],
        }
    }
}

/// Per-frame warps; frames without an entry resolve to the identity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarpMap {
    warps: BTreeMap<u32, WarpMatrix>,
}

impl WarpMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, warp: WarpMatrix) -> Result<()> {
        if self.warps.insert(warp.frame, warp).is_some() {
            return Err(Error::Validation(format!(
                "duplicate warp for frame {}",
                warp.frame
            )));
        }
        Ok(())
    }

    pub fn get(&self, frame: u32) -> WarpMatrix {
        self.warps
            .get(&frame)
            .copied()
            .unwrap_or_else(|| WarpMatrix::identity(frame))
    }

    pub fn len(&self) -> usize {
        self.warps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.warps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &WarpMatrix> {
        self.warps.values()
    }
}

pub fn read_warps(text: &str, path: &Path) -> Result<WarpMap> {
    let mut map = WarpMap::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if fields.len() != 7 {
            return Err(parse_err(format!("expected 7 fields, found {}", fields.len())));
        }
        let frame: u32 = fields[0]
            .parse()
            .ok()
            .filter(|&f| f > 0)
            .ok_or_else(|| parse_err(format!("invalid frame `{}`", fields[0])))?;
        let mut v = [0.0f64; 6];
        for (k, f) in fields[1..].iter().enumerate() {
            v[k] = f
                .parse()
                .map_err(|_| parse_err(format!("invalid number `{f}`")))?;
        }
        let warp = WarpMatrix::new(frame, [[v[0], v[1], v[2]], [v[3], v[4], v[5]]])?;
        map.insert(warp)?;
    }
    Ok(map)
}

/// Reads a warp file; `None` yields the all-identity map (compensation off).
pub fn parse_warps(path: Option<&Path>) -> Result<WarpMap> {
    match path {
        None => Ok(WarpMap::identity()),
        Some(p) => read_warps(&super::read_to_string(p)?, p),
    }
}

pub fn format_warps(map: &WarpMap) -> String {
    let mut out = String::new();
    for w in map.iter() {
        let a = &w.affine;
        writeln!(
            out,
            "{} {} {} {} {} {} {}",
            w.frame, a[0][0], a[0][1], a[0][2], a[1][0], a[1][1], a[1][2]
        )
        .expect("writing to a String cannot fail");
    }
    out
}
