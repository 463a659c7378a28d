//! Constant-velocity Kalman filter over `[x, y, w, h, vx, vy, vw, vh]` with a
//! confidence-gated correction.
//!
//! The correction only fires once `counter` (consecutive reliable observations)
//! reaches `tau_kf`; otherwise the predicted prior is kept and the track coasts.

use nalgebra::{SMatrix, SVector};

use crate::geometry::BoundingBox;

pub type StateVector = SVector<f64, 8>;
pub type StateMatrix = SMatrix<f64, 8, 8>;
pub type ObservationMatrix = SMatrix<f64, 4, 8>;
pub type MeasurementMatrix = SMatrix<f64, 4, 4>;

/// Extents of predicted boxes are floored here before any IoU use.
pub const MIN_EXTENT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicsConfig {
    /// Consecutive reliable observations needed before a correction; `None` never corrects.
    pub tau_kf: Option<u32>,
    /// Objectness at or above which an observation counts as reliable.
    pub tau_obj: f64,
    /// Position process-noise std as a fraction of box size.
    pub pos_noise: f64,
    /// Velocity process-noise std as a fraction of box size.
    pub vel_noise: f64,
    /// Observation-noise std as a fraction of box size.
    pub obs_noise: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        KinematicsConfig {
            tau_kf: Some(1),
            tau_obj: 0.5,
            pos_noise: 0.05,
            vel_noise: 0.025,
            obs_noise: 0.05,
        }
    }
}

impl KinematicsConfig {
    pub fn gate_open(&self, counter: u32) -> bool {
        matches!(self.tau_kf, Some(t) if counter >= t)
    }

    pub fn is_reliable(&self, s_obj: f64) -> bool {
        s_obj >= self.tau_obj
    }

    fn process_noise(&self, w: f64, h: f64) -> StateMatrix {
        let (p, v) = (self.pos_noise, self.vel_noise);
        let stds = [p * w, p * h, p * w, p * h, v * w, v * h, v * w, v * h];
        StateMatrix::from_diagonal(&StateVector::from_iterator(stds.iter().map(|s| s * s)))
    }

    fn observation_noise(&self, w: f64, h: f64) -> MeasurementMatrix {
        let o = self.obs_noise;
        let stds = [o * w, o * h, o * w, o * h];
        MeasurementMatrix::from_diagonal(&SVector::<f64, 4>::from_iterator(stds.iter().map(|s| s * s)))
    }
}

/// Unit-step constant-velocity transition.
pub fn transition() -> StateMatrix {
    let mut f = StateMatrix::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

/// Selects the box components of the state.
pub fn observation() -> ObservationMatrix {
    let mut h = ObservationMatrix::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanTrackState {
    pub state: StateVector,
    pub covariance: StateMatrix,
    /// Consecutive reliable associations.
    pub counter: u32,
}

fn size_of(state: &StateVector) -> (f64, f64) {
    (state[2].max(MIN_EXTENT), state[3].max(MIN_EXTENT))
}

fn symmetrize(m: &mut StateMatrix) {
    *m = (*m + m.transpose()) * 0.5;
}

impl KalmanTrackState {
    pub fn new(z: &BoundingBox, config: &KinematicsConfig) -> Self {
        let (w, h) = (z.w, z.h);
        let (p, v) = (2.0 * config.pos_noise, 10.0 * config.vel_noise);
        let stds = [p * w, p * h, p * w, p * h, v * w, v * h, v * w, v * h];
        KalmanTrackState {
            state: StateVector::from_column_slice(&[z.x, z.y, z.w, z.h, 0.0, 0.0, 0.0, 0.0]),
            covariance: StateMatrix::from_diagonal(&StateVector::from_iterator(
                stds.iter().map(|s| s * s),
            )),
            counter: 0,
        }
    }

    /// Box implied by the current mean, extents floored at [`MIN_EXTENT`].
    pub fn current_box(&self) -> BoundingBox {
        BoundingBox {
            x: self.state[0],
            y: self.state[1],
            w: self.state[2].max(MIN_EXTENT),
            h: self.state[3].max(MIN_EXTENT),
        }
    }

    /// Propagates one frame and returns the predicted box.
    pub fn predict(&mut self, config: &KinematicsConfig) -> BoundingBox {
        let (w, h) = size_of(&self.state);
        let f = transition();
        self.state = f * self.state;
        self.covariance = f * self.covariance * f.transpose() + config.process_noise(w, h);
        symmetrize(&mut self.covariance);
        self.current_box()
    }

    /// Counter bookkeeping plus the gated correction. Returns whether the
    /// correction fired.
    pub fn gated_update(&mut self, z: &BoundingBox, reliable: bool, config: &KinematicsConfig) -> bool {
        self.counter = if reliable { self.counter.saturating_add(1) } else { 0 };
        if !config.gate_open(self.counter) {
            return false;
        }
        self.correct(z, config);
        true
    }

    fn correct(&mut self, z: &BoundingBox, config: &KinematicsConfig) {
        let hm = observation();
        let (w, h) = size_of(&self.state);
        let innovation = SVector::<f64, 4>::from_column_slice(&z.as_array()) - hm * self.state;
        let s = hm * self.covariance * hm.transpose() + config.observation_noise(w, h);
        let Some(s_inv) = s.try_inverse() else {
            return;
        };
        let gain = self.covariance * hm.transpose() * s_inv;
        self.state += gain * innovation;
        self.covariance = (StateMatrix::identity() - gain * hm) * self.covariance;
        symmetrize(&mut self.covariance);
    }
}

pub fn kf_init(z: &BoundingBox, config: &KinematicsConfig) -> KalmanTrackState {
    KalmanTrackState::new(z, config)
}

pub fn kf_predict(s: &KalmanTrackState, config: &KinematicsConfig) -> (KalmanTrackState, BoundingBox) {
    let mut next = s.clone();
    let b = next.predict(config);
    (next, b)
}

pub fn kf_gated_update(
    s: &KalmanTrackState,
    z: &BoundingBox,
    reliable: bool,
    config: &KinematicsConfig,
) -> KalmanTrackState {
    let mut next = s.clone();
    next.gated_update(z, reliable, config);
    next
}
