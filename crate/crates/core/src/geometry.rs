//! Box representations shared by every stage.

/// Axis-aligned box in `(left, top, width, height)` pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub const fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        Self {
            left,
            top,
            width,
            height,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.left + self.width / 2.0, self.top + self.height / 2.0)
    }

    /// Measurement-space form `(cx, cy, aspect, height)` with `aspect = width / height`.
    pub fn to_xyah(&self) -> [f64; 4] {
        let (cx, cy) = self.center();
        [cx, cy, self.width / self.height, self.height]
    }

    pub fn from_xyah(xyah: [f64; 4]) -> Self {
        let [cx, cy, a, h] = xyah;
        let w = a * h;
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let iw = (self.right().min(other.right()) - self.left.max(other.left)).max(0.0);
        let ih = (self.bottom().min(other.bottom()) - self.top.max(other.top)).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyah_roundtrip() {
        let b = BBox::new(10.0, 20.0, 30.0, 60.0);
        let xyah = b.to_xyah();
        assert_eq!(xyah, [25.0, 50.0, 0.5, 60.0]);
        let back = BBox::from_xyah(xyah);
        assert!((back.left - 10.0).abs() < 1e-12 && (back.width - 30.0).abs() < 1e-12);
    }

    #[test]
    fn iou_cases() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&BBox::new(20.0, 0.0, 10.0, 10.0)), 0.0);
        let half = BBox::new(5.0, 0.0, 10.0, 10.0);
        assert!((a.iou(&half) - 50.0 / 150.0).abs() < 1e-12);
    }
}
