//! Gap filling for finished trajectories: linear interpolation and
//! Gaussian-smoothed interpolation (GPR posterior mean with an RBF kernel
//! whose length scale adapts to trajectory length).

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::mot_io::TrackRecord;

/// Added to the Gram diagonal when the noise variance is below it.
pub const GRAM_JITTER: f64 = 1e-9;
/// Smallest width/height a smoothed box may take.
pub const MIN_BOX_SIZE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsiConfig {
    pub tau: f64,
    pub noise_variance: f64,
    pub max_gap: u32,
    pub lambda_min: f64,
}

impl Default for GsiConfig {
    fn default() -> Self {
        Self {
            tau: 10.0,
            noise_variance: 1e-2,
            max_gap: 20,
            lambda_min: 1.0,
        }
    }
}

impl GsiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !(self.noise_variance >= 0.0) || self.max_gap < 1 {
            return Err(Error::Config(format!("invalid GSI settings: {self:?}")));
        }
        if !(self.lambda_min > 0.0) {
            return Err(Error::Config("lambda_min must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpolationMode {
    None,
    Linear,
    Gsi,
}

impl std::str::FromStr for InterpolationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "li" => Ok(Self::Linear),
            "gsi" => Ok(Self::Gsi),
            other => Err(Error::Config(format!(
                "interp_mode must be none, li or gsi, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for InterpolationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Linear => "li",
            Self::Gsi => "gsi",
        })
    }
}

/// One identity's boxes over strictly increasing frames. Positions are
/// `(left, top, width, height)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySeries {
    pub id: u32,
    pub frames: Vec<u32>,
    pub positions: Vec<[f64; 4]>,
    pub confidences: Vec<f64>,
    pub interpolated: Vec<bool>,
}

impl TrajectorySeries {
    pub fn new(id: u32, frames: Vec<u32>, positions: Vec<[f64; 4]>) -> Result<Self> {
        let n = frames.len();
        Self::with_confidences(id, frames, positions, vec![1.0; n])
    }

    pub fn with_confidences(
        id: u32,
        frames: Vec<u32>,
        positions: Vec<[f64; 4]>,
        confidences: Vec<f64>,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Validation(format!("trajectory {id} is empty")));
        }
        if frames.len() != positions.len() || frames.len() != confidences.len() {
            return Err(Error::Validation(format!(
                "trajectory {id}: {} frames but {} positions",
                frames.len(),
                positions.len()
            )));
        }
        if frames.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "trajectory {id}: frames must be strictly increasing"
            )));
        }
        let n = frames.len();
        Ok(Self {
            id,
            frames,
            positions,
            confidences,
            interpolated: vec![false; n],
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Groups records by id, one series per id, ordered by id.
    pub fn from_records(records: &[TrackRecord]) -> Result<Vec<Self>> {
        let mut by_id: BTreeMap<u32, Vec<&TrackRecord>> = BTreeMap::new();
        for r in records {
            by_id.entry(r.id).or_default().push(r);
        }
        by_id
            .into_iter()
            .map(|(id, mut rows)| {
                rows.sort_by_key(|r| r.frame);
                let mut s = Self::with_confidences(
                    id,
                    rows.iter().map(|r| r.frame).collect(),
                    rows.iter()
                        .map(|r| [r.bbox.left, r.bbox.top, r.bbox.width, r.bbox.height])
                        .collect(),
                    rows.iter().map(|r| r.confidence).collect(),
                )?;
                s.interpolated = rows.iter().map(|r| r.interpolated).collect();
                Ok(s)
            })
            .collect()
    }

    pub fn to_records(&self) -> Vec<TrackRecord> {
        (0..self.len())
            .map(|k| {
                let [l, t, w, h] = self.positions[k];
                TrackRecord {
                    frame: self.frames[k],
                    id: self.id,
                    bbox: BBox::new(l, t, w, h),
                    confidence: self.confidences[k],
                    interpolated: self.interpolated[k],
                }
            })
            .collect()
    }
}

/// Fills every gap of `1 < g <= max_gap` frames with linearly interpolated
/// rows; longer gaps stay open and existing rows are untouched.
pub fn linear_interpolate(series: &TrajectorySeries, max_gap: u32) -> TrajectorySeries {
    let mut out = TrajectorySeries {
        id: series.id,
        frames: Vec::with_capacity(series.len()),
        positions: Vec::with_capacity(series.len()),
        confidences: Vec::with_capacity(series.len()),
        interpolated: Vec::with_capacity(series.len()),
    };
    for k in 0..series.len() {
        if k > 0 {
            let (f0, f1) = (series.frames[k - 1], series.frames[k]);
            let gap = f1 - f0;
            if gap > 1 && gap <= max_gap {
                let (p0, p1) = (series.positions[k - 1], series.positions[k]);
                let (c0, c1) = (series.confidences[k - 1], series.confidences[k]);
                for f in f0 + 1..f1 {
                    let t = (f - f0) as f64 / gap as f64;
                    out.frames.push(f);
                    out.positions
                        .push(std::array::from_fn(|i| p0[i] + (p1[i] - p0[i]) * t));
                    out.confidences.push(c0 + (c1 - c0) * t);
                    out.interpolated.push(true);
                }
            }
        }
        out.frames.push(series.frames[k]);
        out.positions.push(series.positions[k]);
        out.confidences.push(series.confidences[k]);
        out.interpolated.push(series.interpolated[k]);
    }
    out
}

/// Length-adaptive RBF length scale `max(τ ln(τ³ / l), lambda_min)`.
pub fn adaptive_lambda(length: usize, tau: f64, lambda_min: f64) -> f64 {
    let l = length.max(1) as f64;
    (tau * (tau.powi(3) / l).ln()).max(lambda_min)
}

pub fn rbf(a: f64, b: f64, lambda: f64) -> f64 {
    let d = a - b;
    (-(d * d) / (2.0 * lambda * lambda)).exp()
}

/// GPR fitted to a fixed set of input frames; reusable across coordinates.
pub struct GprModel {
    inputs: Vec<f64>,
    lambda: f64,
    factor: Cholesky<f64, Dyn>,
}

impl GprModel {
    pub fn fit(inputs: &[f64], lambda: f64, noise_variance: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("length scale must be positive, got {lambda}")));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::Domain(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        let n = inputs.len();
        let diag = if noise_variance < GRAM_JITTER {
            noise_variance + GRAM_JITTER
        } else {
            noise_variance
        };
        let gram = DMatrix::from_fn(n, n, |i, j| {
            rbf(inputs[i], inputs[j], lambda) + if i == j { diag } else { 0.0 }
        });
        let factor = gram
            .cholesky()
            .ok_or_else(|| Error::Numeric("kernel matrix is not positive definite".into()))?;
        Ok(Self {
            inputs: inputs.to_vec(),
            lambda,
            factor,
        })
    }

    /// Posterior mean `K(F*, F) (K(F, F) + σ² I)⁻¹ P` at each query.
    pub fn predict(&self, values: &[f64], queries: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.inputs.len() {
            return Err(Error::Domain(format!(
                "{} values for {} inputs",
                values.len(),
                self.inputs.len()
            )));
        }
        let weights = self.factor.solve(&DVector::from_column_slice(values));
        Ok(queries
            .iter()
            .map(|&q| {
                self.inputs
                    .iter()
                    .zip(weights.iter())
                    .map(|(&x, w)| rbf(q, x, self.lambda) * w)
                    .sum()
            })
            .collect())
    }
}

pub fn gpr_predict(
    frames: &[f64],
    values: &[f64],
    queries: &[f64],
    lambda: f64,
    noise_variance: f64,
) -> Result<Vec<f64>> {
    if frames.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("GPR inputs must be strictly increasing".into()));
    }
    GprModel::fit(frames, lambda, noise_variance)?.predict(values, queries)
}

/// Linear gap filling followed by GPR smoothing of all four coordinates.
pub fn gsi_smooth(series: &TrajectorySeries, config: &GsiConfig) -> Result<TrajectorySeries> {
    if series.len() == 1 {
        return Ok(series.clone());
    }
    let mut out = linear_interpolate(series, config.max_gap);
    let lambda = adaptive_lambda(out.len(), config.tau, config.lambda_min);
    let inputs: Vec<f64> = out.frames.iter().map(|&f| f as f64).collect();
    let model = GprModel::fit(&inputs, lambda, config.noise_variance)?;
    for coord in 0..4 {
        let values: Vec<f64> = out.positions.iter().map(|p| p[coord]).collect();
        let smoothed = model.predict(&values, &inputs)?;
        for (p, v) in out.positions.iter_mut().zip(smoothed) {
            p[coord] = if coord >= 2 { v.max(MIN_BOX_SIZE) } else { v };
        }
    }
    Ok(out)
}

/// Applies the chosen gap filling to every identity of a result set.
pub fn interpolate_records(
    records: &[TrackRecord],
    mode: InterpolationMode,
    config: &GsiConfig,
) -> Result<Vec<TrackRecord>> {
    if mode == InterpolationMode::None {
        let mut out = records.to_vec();
        out.sort_by_key(|r| (r.frame, r.id));
        return Ok(out);
    }
    let series = TrajectorySeries::from_records(records)?;
    let mut out = Vec::with_capacity(records.len());
    for s in &series {
        let filled = match mode {
            InterpolationMode::Linear => linear_interpolate(s, config.max_gap),
            InterpolationMode::Gsi => gsi_smooth(s, config)?,
            InterpolationMode::None => unreachable!(),
        };
        out.extend(filled.to_records());
    }
    out.sort_by_key(|r| (r.frame, r.id));
    Ok(out)
}
