use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Temporal convolution output channels, in order.
pub const TEMPORAL_CHANNELS: [usize; 4] = [32, 64, 128, 256];
pub const TEMPORAL_KERNEL: usize = 7;
pub const TEMPORAL_PADDING: usize = 3;
/// Width of the fusion kernel: one tap per input column `(f, x, y)`.
pub const FUSION_KERNEL: usize = 3;
pub const FEATURE_DIM: usize = 256;
pub const HIDDEN_DIM: usize = 256;
pub const CLASSES: usize = 2;
/// Tensors per branch: four temporal (weight, bias) pairs and the fusion pair.
pub const BRANCH_TENSORS: usize = 10;
pub const TENSOR_COUNT: usize = 2 * BRANCH_TENSORS + 4;

const MAGIC: &[u8; 4] = b"AFL1";
const VERSION: u32 = 1;

/// A dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// All parameters of the link network, in file order:
///
/// | index | tensor | shape |
/// |-------|--------|-------|
/// | `10b + 2l`     | branch `b` temporal conv `l` weight | `[7, c_in, c_out]` |
/// | `10b + 2l + 1` | branch `b` temporal conv `l` bias   | `[c_out]` |
/// | `10b + 8`      | branch `b` fusion weight            | `[3, 256, 256]` |
/// | `10b + 9`      | branch `b` fusion bias              | `[256]` |
/// | 20 / 21        | classifier hidden weight / bias     | `[512, 256]` / `[256]` |
/// | 22 / 23        | classifier output weight / bias     | `[256, 2]` / `[2]` |
///
/// Branch 0 reads the earlier tracklet, branch 1 the later one; the two
/// branches share no parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AflinkWeights<T> {
    pub tensors: Vec<Tensor<T>>,
}

pub fn expected_shapes() -> Vec<Vec<usize>> {
    let mut shapes = Vec::with_capacity(TENSOR_COUNT);
    for _ in 0..2 {
        let mut cin = 1;
        for &cout in &TEMPORAL_CHANNELS {
            shapes.push(vec![TEMPORAL_KERNEL, cin, cout]);
            shapes.push(vec![cout]);
            cin = cout;
        }
        shapes.push(vec![FUSION_KERNEL, FEATURE_DIM, FEATURE_DIM]);
        shapes.push(vec![FEATURE_DIM]);
    }
    shapes.push(vec![2 * FEATURE_DIM, HIDDEN_DIM]);
    shapes.push(vec![HIDDEN_DIM]);
    shapes.push(vec![HIDDEN_DIM, CLASSES]);
    shapes.push(vec![CLASSES]);
    shapes
}

/// Human-readable tensor names in file order.
pub fn tensor_names() -> Vec<String> {
    let mut names = Vec::with_capacity(TENSOR_COUNT);
    for b in ["earlier", "later"] {
        for l in 1..=4 {
            names.push(format!("{b}.temporal{l}.weight"));
            names.push(format!("{b}.temporal{l}.bias"));
        }
        names.push(format!("{b}.fusion.weight"));
        names.push(format!("{b}.fusion.bias"));
    }
    for n in ["hidden.weight", "hidden.bias", "output.weight", "output.bias"] {
        names.push(format!("classifier.{n}"));
    }
    names
}

fn fan_in(shape: &[usize]) -> usize {
    match shape.len() {
        3 => shape[0] * shape[1],
        2 => shape[0],
        _ => 1,
    }
}

impl<T: Scalar> AflinkWeights<T> {
    pub fn zeros() -> Self {
        Self {
            tensors: expected_shapes().iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    /// Seeded initialisation: weights uniform in `±sqrt(6 / fan_in)`, biases
    /// uniform in `±1 / sqrt(fan_in)` of the layer they belong to.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = expected_shapes();
        let mut tensors = Vec::with_capacity(shapes.len());
        for pair in shapes.chunks(2) {
            let fan = fan_in(&pair[0]) as f64;
            let wb = (6.0 / fan).sqrt();
            let bb = 1.0 / fan.sqrt();
            let mut w = Tensor::zeros(&pair[0]);
            for v in &mut w.data {
                *v = T::of(rng.random_range(-wb..wb));
            }
            let mut b = Tensor::zeros(&pair[1]);
            for v in &mut b.data {
                *v = T::of(rng.random_range(-bb..bb));
            }
            tensors.push(w);
            tensors.push(b);
        }
        Self { tensors }
    }

    pub fn validate(&self) -> Result<()> {
        let shapes = expected_shapes();
        if self.tensors.len() != shapes.len() {
            return Err(Error::Domain(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                self.tensors.len()
            )));
        }
        for (i, (t, s)) in self.tensors.iter().zip(&shapes).enumerate() {
            if &t.shape != s || t.data.len() != s.iter().product::<usize>() {
                return Err(Error::Domain(format!(
                    "tensor {i} has shape {:?}, expected {s:?}",
                    t.shape
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> AflinkWeights<U> {
        AflinkWeights {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|v| U::of(v.as_f64())).collect(),
                })
                .collect(),
        }
    }

    /// Exchanges the two branches and the matching halves of the classifier
    /// input, so the network scores `(later, earlier)` as the original scored
    /// `(earlier, later)`.
    pub fn swapped_branches(&self) -> Self {
        let mut out = self.clone();
        for i in 0..BRANCH_TENSORS {
            out.tensors.swap(i, BRANCH_TENSORS + i);
        }
        let hidden = &mut out.tensors[2 * BRANCH_TENSORS];
        let half = FEATURE_DIM * HIDDEN_DIM;
        let (top, bottom) = hidden.data.split_at_mut(half);
        top.swap_with_slice(bottom);
        out
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * *y;
            }
        }
    }
}

impl AflinkWeights<f32> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.parameter_count() * 4 + TENSOR_COUNT * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |m: &str| Error::Format(format!("link weight file: {m}"));
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(fmt("bad magic"));
        }
        let mut pos = 4;
        let u32_at = |pos: &mut usize| -> Result<u32> {
            let b = bytes
                .get(*pos..*pos + 4)
                .ok_or_else(|| fmt("truncated"))?;
            *pos += 4;
            Ok(u32::from_le_bytes(b.try_into().unwrap()))
        };
        let version = u32_at(&mut pos)?;
        if version != VERSION {
            return Err(fmt(&format!("unsupported version {version}")));
        }
        let mut tensors = Vec::with_capacity(TENSOR_COUNT);
        for (i, expected) in expected_shapes().iter().enumerate() {
            let rank = u32_at(&mut pos)? as usize;
            if rank != expected.len() {
                return Err(fmt(&format!("tensor {i} has rank {rank}, expected {}", expected.len())));
            }
            let shape: Vec<usize> = (0..rank)
                .map(|_| u32_at(&mut pos).map(|d| d as usize))
                .collect::<Result<_>>()?;
            if &shape != expected {
                return Err(fmt(&format!("tensor {i} has shape {shape:?}, expected {expected:?}")));
            }
            let n: usize = shape.iter().product();
            let raw = bytes
                .get(pos..pos + 4 * n)
                .ok_or_else(|| fmt("truncated"))?;
            pos += 4 * n;
            let data: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(fmt(&format!("tensor {i} holds non-finite values")));
            }
            tensors.push(Tensor { shape, data });
        }
        if pos != bytes.len() {
            return Err(fmt("trailing bytes after last tensor"));
        }
        Ok(Self { tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}
