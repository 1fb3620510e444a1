//! Constant-velocity Kalman filter over `(cx, cy, a, h)` boxes with
//! confidence-scaled measurement noise and camera-motion compensation.

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};

use crate::error::{Error, Result};
use crate::mot_io::WarpMatrix;

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
type Observation = SMatrix<f64, 4, 8>;

/// Position noise relative to box height.
pub const STD_WEIGHT_POSITION: f64 = 1.0 / 20.0;
/// Velocity noise relative to box height.
pub const STD_WEIGHT_VELOCITY: f64 = 1.0 / 160.0;
/// Lower bound on every diagonal entry of the adapted measurement covariance.
pub const NOISE_FLOOR: f64 = 1e-6;

/// Filter state: mean `(cx, cy, a, h, vcx, vcy, va, vh)` and its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

/// Where the preset measurement covariance `R` comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseBase {
    /// `diag((w_p h)², (w_p h)², 1e-2, (w_p h)²)` with `h` the predicted height.
    HeightScaled,
    /// Fixed positive diagonal.
    Fixed(Vector4<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementNoiseModel {
    pub base: NoiseBase,
    /// Scale `R` by `(1 - confidence)` at update time.
    pub nsa_enabled: bool,
}

impl Default for MeasurementNoiseModel {
    fn default() -> Self {
        Self {
            base: NoiseBase::HeightScaled,
            nsa_enabled: true,
        }
    }
}

impl MeasurementNoiseModel {
    pub fn fixed(diagonal: [f64; 4], nsa_enabled: bool) -> Result<Self> {
        if diagonal.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::Domain(format!(
                "measurement noise diagonal must be positive, got {diagonal:?}"
            )));
        }
        Ok(Self {
            base: NoiseBase::Fixed(Vector4::from(diagonal)),
            nsa_enabled,
        })
    }

    /// The preset covariance `R` for a box of height `h`.
    pub fn base_covariance(&self, h: f64) -> Matrix4<f64> {
        match self.base {
            NoiseBase::HeightScaled => {
                let p = STD_WEIGHT_POSITION * h;
                Matrix4::from_diagonal(&Vector4::new(p * p, p * p, 1e-2, p * p))
            }
            NoiseBase::Fixed(d) => Matrix4::from_diagonal(&d),
        }
    }

    /// Measurement covariance used for an update with a detection of the given
    /// confidence: `(1 - c) R` when NSA is on, `R` otherwise, floored at
    /// [`NOISE_FLOOR`] on the diagonal.
    pub fn adapted_covariance(&self, h: f64, confidence: f64) -> Matrix4<f64> {
        let mut r = self.base_covariance(h);
        if self.nsa_enabled {
            r *= 1.0 - confidence;
        }
        for i in 0..4 {
            r[(i, i)] = r[(i, i)].max(NOISE_FLOOR);
        }
        r
    }
}

fn observation() -> Observation {
    let mut h = Observation::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

fn symmetrize(p: &mut StateCovariance) {
    let t = p.transpose();
    *p = (*p + t) * 0.5;
}

/// Starts a track from an unassociated measurement `(cx, cy, a, h)`.
pub fn initiate(measurement: [f64; 4]) -> Result<KalmanState> {
    let [cx, cy, a, h] = measurement;
    if !(h > 0.0) || !(a > 0.0) || !cx.is_finite() || !cy.is_finite() || !h.is_finite() {
        return Err(Error::Domain(format!(
            "measurement needs positive aspect and height, got a = {a}, h = {h}"
        )));
    }
    let mut mean = StateVector::zeros();
    mean.fixed_rows_mut::<4>(0).copy_from(&Vector4::new(cx, cy, a, h));
    let p = 2.0 * STD_WEIGHT_POSITION * h;
    let v = 10.0 * STD_WEIGHT_VELOCITY * h;
    let std = [p, p, 1e-2, p, v, v, 1e-5, v];
    let covariance = StateCovariance::from_diagonal(&StateVector::from_iterator(
        std.iter().map(|s| s * s),
    ));
    Ok(KalmanState { mean, covariance })
}

impl KalmanState {
    pub fn measurement(&self) -> [f64; 4] {
        [self.mean[0], self.mean[1], self.mean[2], self.mean[3]]
    }

    /// One constant-velocity step with height-scaled process noise.
    pub fn predict(&self) -> KalmanState {
        let h = self.mean[3];
        let p = STD_WEIGHT_POSITION * h;
        let v = STD_WEIGHT_VELOCITY * h;
        let q = [p, p, 1e-2, p, v, v, 1e-5, v];
        let motion_cov =
            StateCovariance::from_diagonal(&StateVector::from_iterator(q.iter().map(|s| s * s)));

        let mut f = StateCovariance::identity();
        for i in 0..4 {
            f[(i, i + 4)] = 1.0;
        }
        let mean = f * self.mean;
        let mut covariance = f * self.covariance * f.transpose() + motion_cov;
        symmetrize(&mut covariance);
        KalmanState { mean, covariance }
    }

    /// Projects into measurement space with the given measurement covariance.
    pub fn project(&self, r: &Matrix4<f64>) -> (Vector4<f64>, Matrix4<f64>) {
        let h = observation();
        let mean = h * self.mean;
        let cov = h * self.covariance * h.transpose() + r;
        (mean, cov)
    }

    /// Kalman correction with noise adapted to the detection confidence.
    pub fn update(
        &self,
        measurement: [f64; 4],
        confidence: f64,
        noise: &MeasurementNoiseModel,
    ) -> Result<KalmanState> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Domain(format!(
                "confidence must lie in [0, 1], got {confidence}"
            )));
        }
        let r = noise.adapted_covariance(self.mean[3], confidence);
        let (projected_mean, innovation_cov) = self.project(&r);
        let chol = innovation_cov.cholesky().ok_or_else(|| {
            Error::Numeric("innovation covariance is not positive definite".into())
        })?;
        let obs = observation();
        // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P
        let gain = chol.solve(&(obs * self.covariance)).transpose();
        let innovation = Vector4::from(measurement) - projected_mean;
        let mean = self.mean + gain * innovation;
        // Joseph form keeps the posterior covariance positive semi-definite.
        let i_kh = StateCovariance::identity() - gain * obs;
        let mut covariance =
            i_kh * self.covariance * i_kh.transpose() + gain * r * gain.transpose();
        symmetrize(&mut covariance);
        Ok(KalmanState { mean, covariance })
    }

    /// Squared Mahalanobis distance of each measurement to the projected state.
    pub fn gating_distance(
        &self,
        measurements: &[[f64; 4]],
        noise: &MeasurementNoiseModel,
    ) -> Result<Vec<f64>> {
        let r = noise.base_covariance(self.mean[3]);
        let (mean, cov) = self.project(&r);
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Numeric("projected covariance is singular".into()))?;
        let l = chol.l();
        Ok(measurements
            .iter()
            .map(|m| {
                let d = Vector4::from(*m) - mean;
                let z = l
                    .solve_lower_triangular(&d)
                    .expect("cholesky factor has a positive diagonal");
                z.norm_squared().max(0.0)
            })
            .collect())
    }

    /// Moves the state into the current frame's coordinates. Positions go
    /// through the full affine map, velocities through its linear part, and
    /// height (with its velocity) scales by `sqrt(|det A|)`, the geometric
    /// mean of the singular values. Aspect ratio is scale-free and untouched.
    pub fn apply_warp(&self, warp: &WarpMatrix) -> KalmanState {
        if warp.is_identity() {
            return self.clone();
        }
        let a = &warp.affine;
        let scale = warp.determinant().abs().sqrt();
        let mut t = StateCovariance::zeros();
        for base in [0, 4] {
            t[(base, base)] = a[0][0];
            t[(base, base + 1)] = a[0][1];
            t[(base + 1, base)] = a[1][0];
            t[(base + 1, base + 1)] = a[1][1];
            t[(base + 2, base + 2)] = 1.0;
            t[(base + 3, base + 3)] = scale;
        }
        let mut mean = t * self.mean;
        mean[0] += a[0][2];
        mean[1] += a[1][2];
        let mut covariance = t * self.covariance * t.transpose();
        symmetrize(&mut covariance);
        KalmanState { mean, covariance }
    }
}
