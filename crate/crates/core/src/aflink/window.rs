use super::scalar::Scalar;

/// Rows per tracklet window.
pub const WINDOW_LEN: usize = 30;
/// Frame offsets are divided by this before entering the network.
pub const FRAME_SCALE: f64 = 30.0;
/// Pixel offsets from the link point are divided by this before entering
/// the network.
pub const POSITION_SCALE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Front,
    Back,
}

/// Up to [`WINDOW_LEN`] `(frame, cx, cy)` rows of one tracklet, taken at the
/// end that touches the link point and zero-padded on the far side.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackletWindow {
    rows: Vec<[f64; 3]>,
    padding: Padding,
}

impl TrackletWindow {
    /// Last rows of a tracklet that ends at the link point; pads at the front.
    pub fn tail(points: &[[f64; 3]]) -> Self {
        let start = points.len().saturating_sub(WINDOW_LEN);
        Self {
            rows: points[start..].to_vec(),
            padding: Padding::Front,
        }
    }

    /// First rows of a tracklet that starts at the link point; pads at the back.
    pub fn head(points: &[[f64; 3]]) -> Self {
        Self {
            rows: points[..points.len().min(WINDOW_LEN)].to_vec(),
            padding: Padding::Back,
        }
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    fn first_frame(&self) -> Option<f64> {
        self.rows.first().map(|r| r[0])
    }

    /// Full `WINDOW_LEN × 3` matrix with padding rows set to zero, after
    /// subtracting `origin` from the frame column and `anchor` from the
    /// center, then scaling.
    pub fn normalized(&self, origin: f64, anchor: [f64; 2]) -> [[f64; 3]; WINDOW_LEN] {
        let mut out = [[0.0; 3]; WINDOW_LEN];
        let offset = match self.padding {
            Padding::Front => WINDOW_LEN - self.rows.len(),
            Padding::Back => 0,
        };
        for (k, r) in self.rows.iter().enumerate() {
            out[offset + k] = [
                (r[0] - origin) / FRAME_SCALE,
                (r[1] - anchor[0]) / POSITION_SCALE,
                (r[2] - anchor[1]) / POSITION_SCALE,
            ];
        }
        out
    }
}

/// Network input for one tracklet pair, each branch stored column-major
/// (`column * WINDOW_LEN + t`).
#[derive(Debug, Clone, PartialEq)]
pub struct PairInput<T> {
    pub earlier: Vec<T>,
    pub later: Vec<T>,
}

impl<T: Scalar> PairInput<T> {
    /// Normalises both windows against the pair's earliest frame and the
    /// earlier tracklet's last center. Absolute image coordinates leave the
    /// motion signal in the third decimal and the network stalls at the
    /// class prior.
    pub fn encode(earlier: &TrackletWindow, later: &TrackletWindow) -> Self {
        let origin = match (earlier.first_frame(), later.first_frame()) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 0.0,
        };
        let flatten = |m: [[f64; 3]; WINDOW_LEN]| {
            let mut v = vec![T::zero(); 3 * WINDOW_LEN];
            for (t, row) in m.iter().enumerate() {
                for c in 0..3 {
                    v[c * WINDOW_LEN + t] = T::of(row[c]);
                }
            }
            v
        };
        let anchor = earlier
            .rows
            .last()
            .or(later.rows.first())
            .map_or([0.0, 0.0], |r| [r[1], r[2]]);
        Self {
            earlier: flatten(earlier.normalized(origin, anchor)),
            later: flatten(later.normalized(origin, anchor)),
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            earlier: self.later.clone(),
            later: self.earlier.clone(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> PairInput<U> {
        PairInput {
            earlier: self.earlier.iter().map(|v| U::of(v.as_f64())).collect(),
            later: self.later.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}
