//! Linear Kalman filter over box state.
//!
//! State is `(x, y, z, yaw, l, w, h, vx, vy, vz)`: constant velocity in
//! position, random walk in yaw and dimensions. The filter observes the first
//! seven components.

use nalgebra::{DMatrix, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{wrap_angle, Box3D, Detection};

pub const STATE_DIM: usize = 10;
pub const MEAS_DIM: usize = 7;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateCov = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type InnovationCov = SMatrix<f64, MEAS_DIM, MEAS_DIM>;
type Observation = SMatrix<f64, MEAS_DIM, STATE_DIM>;

const MIN_DIM: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCov,
}

impl KalmanState {
    pub fn to_box(&self) -> Box3D {
        let m = &self.mean;
        Box3D {
            center: [m[0], m[1], m[2]],
            dims: [m[4].max(MIN_DIM), m[5].max(MIN_DIM), m[6].max(MIN_DIM)],
            yaw: wrap_angle(m[3]),
        }
    }

    pub fn velocity(&self) -> [f64; 3] {
        [self.mean[7], self.mean[8], self.mean[9]]
    }

    /// Checks symmetry (1e-9) and positive semidefiniteness (eigenvalues ≥ -1e-9).
    pub fn check_covariance(&self) -> Result<()> {
        let p = &self.covariance;
        let asym = (p - p.transpose()).amax();
        if !(asym <= 1e-9) {
            return Err(Error::FilterDivergence(format!("covariance asymmetry {asym:e}")));
        }
        let min_eig = p.symmetric_eigenvalues().min();
        if !(min_eig >= -1e-9) {
            return Err(Error::FilterDivergence(format!("covariance eigenvalue {min_eig:e}")));
        }
        Ok(())
    }
}

/// Noise model. All entries are variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanConfig {
    /// Per-state process noise, scaled by `dt` at each prediction.
    pub process_noise: [f64; STATE_DIM],
    /// Measurement noise for (x, y, z, yaw, l, w, h).
    pub measurement_noise: [f64; MEAS_DIM],
    pub initial_velocity_var: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        let pos = 0.3f64.powi(2);
        let yaw = 0.2f64.powi(2);
        let dim = 0.1f64.powi(2);
        Self {
            process_noise: [0.01; STATE_DIM],
            measurement_noise: [pos, pos, pos, yaw, dim, dim, dim],
            initial_velocity_var: 4.0,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self
            .process_noise
            .iter()
            .chain(self.measurement_noise.iter())
            .chain(std::iter::once(&self.initial_velocity_var))
            .all(|v| v.is_finite() && *v > 0.0);
        if !ok {
            return invalid("all Kalman noise variances must be finite and > 0");
        }
        Ok(())
    }

    fn measurement_cov(&self) -> InnovationCov {
        InnovationCov::from_diagonal(&SVector::from(self.measurement_noise))
    }
}

fn observation() -> Observation {
    Observation::from_fn(|r, c| if r == c { 1.0 } else { 0.0 })
}

fn symmetrize(p: &mut StateCov) {
    *p = (*p + p.transpose()) * 0.5;
}

/// Starts a filter at a detection.
pub fn kf_init(det: &Detection, cfg: &KalmanConfig) -> KalmanState {
    let z = det.bbox.measurement();
    let v = det.velocity_hint.unwrap_or([0.0; 3]);
    let mean = StateVector::from_fn(|i, _| if i < MEAS_DIM { z[i] } else { v[i - MEAS_DIM] });
    let diag = StateVector::from_fn(|i, _| {
        if i < MEAS_DIM {
            cfg.measurement_noise[i]
        } else {
            cfg.initial_velocity_var
        }
    });
    KalmanState {
        mean,
        covariance: StateCov::from_diagonal(&diag),
    }
}

/// Transition matrix for a step of `dt` seconds.
pub fn transition(dt: f64) -> StateCov {
    let mut f = StateCov::identity();
    f[(0, 7)] = dt;
    f[(1, 8)] = dt;
    f[(2, 9)] = dt;
    f
}

/// Constant-velocity prediction.
pub fn kf_predict(state: &KalmanState, dt: f64, cfg: &KalmanConfig) -> Result<KalmanState> {
    if !(dt.is_finite() && dt > 0.0) {
        return invalid(format!("prediction step must be positive, got {dt}"));
    }
    let f = transition(dt);
    let q = StateCov::from_diagonal(&SVector::from(cfg.process_noise)) * dt;
    let mut mean = f * state.mean;
    mean[3] = wrap_angle(mean[3]);
    let mut covariance = f * state.covariance * f.transpose() + q;
    symmetrize(&mut covariance);
    Ok(KalmanState { mean, covariance })
}

/// `S = H P Hᵀ + R` for the current state.
pub fn innovation_cov(state: &KalmanState, cfg: &KalmanConfig) -> InnovationCov {
    let h = observation();
    let s = h * state.covariance * h.transpose() + cfg.measurement_cov();
    (s + s.transpose()) * 0.5
}

pub fn innovation_cov_dyn(state: &KalmanState, cfg: &KalmanConfig) -> DMatrix<f64> {
    let s = innovation_cov(state, cfg);
    DMatrix::from_fn(MEAS_DIM, MEAS_DIM, |r, c| s[(r, c)])
}

/// Measurement update with one detection. Returns the posterior and the
/// innovation covariance used for the update.
pub fn kf_update(state: &KalmanState, det: &Detection, cfg: &KalmanConfig) -> Result<(KalmanState, InnovationCov)> {
    let h = observation();
    let r = cfg.measurement_cov();
    let s = innovation_cov(state, cfg);
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::FilterDivergence("innovation covariance is not positive definite".into()))?;

    let z = SVector::<f64, MEAS_DIM>::from(det.bbox.measurement());
    let mut y = z - h * state.mean;
    y[3] = wrap_angle(y[3]);

    // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P
    let pht = state.covariance * h.transpose();
    let gain: SMatrix<f64, STATE_DIM, MEAS_DIM> = chol.solve(&pht.transpose()).transpose();

    let mut mean = state.mean + gain * y;
    mean[3] = wrap_angle(mean[3]);
    for i in 4..7 {
        mean[i] = mean[i].max(MIN_DIM);
    }

    // Joseph form keeps P symmetric PSD
    let i_kh = StateCov::identity() - gain * h;
    let mut covariance = i_kh * state.covariance * i_kh.transpose() + gain * r * gain.transpose();
    symmetrize(&mut covariance);

    if !mean.iter().all(|v| v.is_finite()) || !covariance.iter().all(|v| v.is_finite()) {
        return Err(Error::FilterDivergence("non-finite posterior".into()));
    }
    Ok((KalmanState { mean, covariance }, s))
}

/// Sequential updates with every detection assigned to one track, highest
/// score first (ties keep input order). Returns the innovation covariance of
/// the last update.
pub fn update_with_multiple(
    state: &KalmanState,
    dets: &[&Detection],
    cfg: &KalmanConfig,
) -> Result<(KalmanState, InnovationCov)> {
    if dets.is_empty() {
        return invalid("update_with_multiple needs at least one detection");
    }
    let mut order: Vec<&Detection> = dets.to_vec();
    order.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut current = state.clone();
    let mut last_s = InnovationCov::zeros();
    for d in order {
        let (next, s) = kf_update(&current, d, cfg)?;
        current = next;
        last_s = s;
    }
    Ok((current, last_s))
}
