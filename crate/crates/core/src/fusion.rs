//! Sensor fusion: a 13-state extended Kalman filter over position,
//! velocity, attitude quaternion, and body angular rate.
//!
//! Visual pose estimates enter as 7-vector measurements whose noise
//! comes from the Monte Carlo dropout spread of the regressor, so the
//! filter automatically down-weights frames the network is unsure
//! about. Compass headings and depth readings are fused as scalar
//! measurements. The quaternion is handled additively with
//! renormalization after every step; innovations fold the double cover
//! onto the predicted hemisphere.
//!
//! State layout: `[p(3), v(3), q(4: w x y z), w(3)]`, world-frame
//! position and velocity, body-frame angular rate.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::{SMatrix, SVector, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::data::PoseNormalization;
use crate::geom::{Pose, Quaternion};
use crate::regressor::{NetError, NetParams};
use crate::scene::Image;

pub const STATE_DIM: usize = 13;
const IP: usize = 0;
const IV: usize = 3;
const IQ: usize = 6;
const IW: usize = 10;

type Vec13 = SVector<f64, STATE_DIM>;
type Mat13 = SMatrix<f64, STATE_DIM, STATE_DIM>;

#[derive(Clone, Debug, PartialEq)]
pub enum FusionError {
    InvalidConfig { reason: &'static str },
    InvalidMeasurement { reason: &'static str },
    /// Measurement `index` is earlier than the filter time.
    OutOfOrder { index: usize },
    /// Gap before measurement `index` exceeds the configured maximum.
    GapExceeded { index: usize, dt: f64 },
    SingularInnovationCovariance,
    SingularCovariance,
    /// Compass model is undefined when the camera looks straight up
    /// or down.
    DegenerateHeading,
    DegenerateQuaternion,
    NonFiniteState,
    Net(NetError),
}

impl fmt::Display for FusionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionError::InvalidConfig { reason } => write!(f, "invalid filter config: {reason}"),
            FusionError::InvalidMeasurement { reason } => {
                write!(f, "invalid measurement: {reason}")
            }
            FusionError::OutOfOrder { index } => {
                write!(f, "measurement {index} is out of order")
            }
            FusionError::GapExceeded { index, dt } => {
                write!(f, "gap of {dt} s before measurement {index} exceeds the maximum")
            }
            FusionError::SingularInnovationCovariance => {
                write!(f, "innovation covariance is not positive definite")
            }
            FusionError::SingularCovariance => {
                write!(f, "state covariance marginal is not positive definite")
            }
            FusionError::DegenerateHeading => {
                write!(f, "heading is undefined for a vertical view direction")
            }
            FusionError::DegenerateQuaternion => {
                write!(f, "state quaternion collapsed to zero norm")
            }
            FusionError::NonFiniteState => write!(f, "filter state became non-finite"),
            FusionError::Net(e) => write!(f, "estimator measurement failed: {e}"),
        }
    }
}

impl From<NetError> for FusionError {
    fn from(e: NetError) -> Self {
        FusionError::Net(e)
    }
}

/// Process and measurement noise levels plus run guards.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FilterConfig {
    /// White linear-acceleration noise density, m/s^2 per sqrt(s).
    pub accel_noise: f64,
    /// White angular-acceleration noise density, rad/s^2 per sqrt(s).
    pub ang_accel_noise: f64,
    pub init_position_std: f64,
    pub init_velocity_std: f64,
    /// Initial per-component quaternion std.
    pub init_attitude_std: f64,
    pub init_rate_std: f64,
    pub compass_noise_std: f64,
    pub altimeter_noise_std: f64,
    /// Longest prediction the filter will bridge, in seconds.
    pub max_gap: f64,
    /// Monte Carlo dropout passes per visual measurement.
    pub mc_samples: usize,
    /// Lower bound applied to visual measurement stds.
    pub noise_floor: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            accel_noise: 0.5,
            ang_accel_noise: 0.3,
            init_position_std: 1.0,
            init_velocity_std: 0.5,
            init_attitude_std: 0.1,
            init_rate_std: 0.2,
            compass_noise_std: 0.05,
            altimeter_noise_std: 0.05,
            max_gap: 5.0,
            mc_samples: crate::regressor::DEFAULT_MC_SAMPLES,
            noise_floor: 1e-3,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        let positive = [
            (self.accel_noise, "acceleration noise must be positive"),
            (self.ang_accel_noise, "angular acceleration noise must be positive"),
            (self.init_position_std, "initial position std must be positive"),
            (self.init_velocity_std, "initial velocity std must be positive"),
            (self.init_attitude_std, "initial attitude std must be positive"),
            (self.init_rate_std, "initial rate std must be positive"),
            (self.compass_noise_std, "compass noise must be positive"),
            (self.altimeter_noise_std, "altimeter noise must be positive"),
            (self.max_gap, "max gap must be positive"),
            (self.noise_floor, "noise floor must be positive"),
        ];
        for (v, reason) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(FusionError::InvalidConfig { reason });
            }
        }
        if self.mc_samples < 2 {
            return Err(FusionError::InvalidConfig {
                reason: "at least two Monte Carlo samples are required",
            });
        }
        Ok(())
    }
}

/// One measurement fused by the filter.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum MeasurementKind {
    /// World position plus attitude quaternion, packed
    /// `[x, y, z, qw, qx, qy, qz]`, with per-component stds.
    Pose7 { value: [f64; 7], std: [f64; 7] },
    /// Heading of the view direction projected into the horizontal
    /// plane, radians.
    Compass { heading: f64 },
    /// Direct reading of the z coordinate (negative below surface).
    Altimeter { z: f64 },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimedMeasurement {
    pub timestamp: f64,
    pub kind: MeasurementKind,
}

/// Filter mean and covariance at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub time: f64,
    pub state: Vec13,
    pub cov: Mat13,
}

impl FilterState {
    /// Starts a filter at `pose` with zero velocity and rate, and a
    /// diagonal covariance from the configured initial stds.
    pub fn from_pose(pose: &Pose, time: f64, config: &FilterConfig) -> Self {
        let mut state = Vec13::zeros();
        state[IP] = pose.position.x;
        state[IP + 1] = pose.position.y;
        state[IP + 2] = pose.position.z;
        let q = pose.orientation;
        state[IQ] = q.w;
        state[IQ + 1] = q.x;
        state[IQ + 2] = q.y;
        state[IQ + 3] = q.z;
        let mut cov = Mat13::zeros();
        for i in 0..3 {
            cov[(IP + i, IP + i)] = config.init_position_std * config.init_position_std;
            cov[(IV + i, IV + i)] = config.init_velocity_std * config.init_velocity_std;
            cov[(IW + i, IW + i)] = config.init_rate_std * config.init_rate_std;
        }
        for i in 0..4 {
            cov[(IQ + i, IQ + i)] = config.init_attitude_std * config.init_attitude_std;
        }
        FilterState { time, state, cov }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.state[IP], self.state[IP + 1], self.state[IP + 2])
    }

    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.state[IV], self.state[IV + 1], self.state[IV + 2])
    }

    pub fn quaternion(&self) -> Quaternion {
        Quaternion::new(
            self.state[IQ],
            self.state[IQ + 1],
            self.state[IQ + 2],
            self.state[IQ + 3],
        )
    }

    pub fn angular_rate(&self) -> Vector3<f64> {
        Vector3::new(self.state[IW], self.state[IW + 1], self.state[IW + 2])
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.position(), self.quaternion())
    }
}

/// Left-multiplication matrix: `q ⊗ p = ml(q) · p`.
fn ml(q: Quaternion) -> SMatrix<f64, 4, 4> {
    SMatrix::<f64, 4, 4>::new(
        q.w, -q.x, -q.y, -q.z, //
        q.x, q.w, -q.z, q.y, //
        q.y, q.z, q.w, -q.x, //
        q.z, -q.y, q.x, q.w,
    )
}

/// Right-multiplication matrix: `q ⊗ p = mr(p) · q`.
fn mr(p: Quaternion) -> SMatrix<f64, 4, 4> {
    SMatrix::<f64, 4, 4>::new(
        p.w, -p.x, -p.y, -p.z, //
        p.x, p.w, p.z, -p.y, //
        p.y, -p.z, p.w, p.x, //
        p.z, p.y, -p.x, p.w,
    )
}

/// `∂(q ⊗ exp(w dt)) / ∂w`, the 4×3 right-factor sensitivity before
/// the left multiplication by `ml(q)`.
fn dexp_jacobian(w: Vector3<f64>, dt: f64) -> SMatrix<f64, 4, 3> {
    let s = w.norm();
    let mut d = SMatrix::<f64, 4, 3>::zeros();
    if s < 1e-8 {
        // Taylor limit: the quadratic remainder is below double
        // precision at this magnitude.
        for j in 0..3 {
            d[(0, j)] = -(dt * dt / 4.0) * w[j];
            d[(1 + j, j)] = dt / 2.0;
        }
        return d;
    }
    let half = s * dt / 2.0;
    let (sh, ch) = (half.sin(), half.cos());
    for j in 0..3 {
        d[(0, j)] = -sh * (dt / 2.0) * w[j] / s;
        for i in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            d[(1 + i, j)] = sh * (delta / s - w[i] * w[j] / (s * s * s))
                + ch * (dt / 2.0) * w[i] * w[j] / (s * s);
        }
    }
    d
}

/// Quaternion rate map `L(q)` with `q̇ = L(q) · w`; also carries
/// rotation-vector noise into quaternion components.
fn rate_map(q: Quaternion) -> SMatrix<f64, 4, 3> {
    0.5 * SMatrix::<f64, 4, 3>::new(
        -q.x, -q.y, -q.z, //
        q.w, -q.z, q.y, //
        q.z, q.w, -q.x, //
        -q.y, q.x, q.w,
    )
}

/// Constant-velocity, constant-rate propagation without quaternion
/// renormalization, so it is exactly differentiable.
fn propagate_state(x: &Vec13, dt: f64) -> Vec13 {
    let mut out = *x;
    for i in 0..3 {
        out[IP + i] = x[IP + i] + x[IV + i] * dt;
    }
    let q = Quaternion::new(x[IQ], x[IQ + 1], x[IQ + 2], x[IQ + 3]);
    let w = Vector3::new(x[IW], x[IW + 1], x[IW + 2]);
    let dq = Quaternion::from_scaled_axis(w * dt);
    let qn = q * dq;
    out[IQ] = qn.w;
    out[IQ + 1] = qn.x;
    out[IQ + 2] = qn.y;
    out[IQ + 3] = qn.z;
    out
}

/// Jacobian of [`propagate_state`] at `x`.
fn state_jacobian(x: &Vec13, dt: f64) -> Mat13 {
    let mut f = Mat13::identity();
    for i in 0..3 {
        f[(IP + i, IV + i)] = dt;
    }
    let q = Quaternion::new(x[IQ], x[IQ + 1], x[IQ + 2], x[IQ + 3]);
    let w = Vector3::new(x[IW], x[IW + 1], x[IW + 2]);
    let dq = Quaternion::from_scaled_axis(w * dt);
    let fqq = mr(dq);
    let fqw = ml(q) * dexp_jacobian(w, dt);
    for r in 0..4 {
        for c in 0..4 {
            f[(IQ + r, IQ + c)] = fqq[(r, c)];
        }
        for c in 0..3 {
            f[(IQ + r, IW + c)] = fqw[(r, c)];
        }
    }
    f
}

/// Discrete process noise: white linear acceleration on each position
/// axis and white angular acceleration carried through the quaternion
/// rate map, both with the standard `[dt³/3, dt²/2; dt²/2, dt]`
/// integration kernel.
fn process_noise(q: Quaternion, dt: f64, config: &FilterConfig) -> Mat13 {
    let mut noise = Mat13::zeros();
    let sa2 = config.accel_noise * config.accel_noise;
    let (d3, d2) = (dt * dt * dt / 3.0, dt * dt / 2.0);
    for i in 0..3 {
        noise[(IP + i, IP + i)] = sa2 * d3;
        noise[(IP + i, IV + i)] = sa2 * d2;
        noise[(IV + i, IP + i)] = sa2 * d2;
        noise[(IV + i, IV + i)] = sa2 * dt;
    }
    let sw2 = config.ang_accel_noise * config.ang_accel_noise;
    let l = rate_map(q);
    let qq = l * l.transpose() * (sw2 * d3);
    let qw = l * (sw2 * d2);
    for r in 0..4 {
        for c in 0..4 {
            noise[(IQ + r, IQ + c)] = qq[(r, c)];
        }
        for c in 0..3 {
            noise[(IQ + r, IW + c)] = qw[(r, c)];
            noise[(IW + c, IQ + r)] = qw[(r, c)];
        }
    }
    for i in 0..3 {
        noise[(IW + i, IW + i)] = sw2 * dt;
    }
    noise
}

fn wrap_angle(a: f64) -> f64 {
    a - (a / core::f64::consts::TAU).round() * core::f64::consts::TAU
}

/// Horizontal heading of the camera view direction for the state
/// quaternion `q`: `atan2` of the world-frame forward axis. Scale
/// invariant in `q`.
fn heading_terms(q: Quaternion) -> (f64, f64) {
    let a = 2.0 * (q.y * q.z - q.w * q.x);
    let b = 2.0 * (q.x * q.z + q.w * q.y);
    (a, b)
}

/// The filter itself: config plus current mean and covariance.
#[derive(Clone, Debug)]
pub struct Ekf {
    config: FilterConfig,
    state: FilterState,
}

impl Ekf {
    pub fn new(config: FilterConfig, initial: FilterState) -> Result<Self, FusionError> {
        config.validate()?;
        if !initial.time.is_finite() || initial.state.iter().any(|v| !v.is_finite()) {
            return Err(FusionError::NonFiniteState);
        }
        let mut ekf = Ekf { config, state: initial };
        ekf.normalize_quaternion()?;
        Ok(ekf)
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    /// Advances mean and covariance by `dt` seconds.
    pub fn predict(&mut self, dt: f64) -> Result<(), FusionError> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(FusionError::InvalidMeasurement { reason: "prediction dt must be >= 0" });
        }
        if dt == 0.0 {
            return Ok(());
        }
        let f = state_jacobian(&self.state.state, dt);
        let noise = process_noise(self.state.quaternion(), dt, &self.config);
        self.state.state = propagate_state(&self.state.state, dt);
        self.state.cov = f * self.state.cov * f.transpose() + noise;
        self.state.time += dt;
        self.normalize_quaternion()?;
        self.symmetrize();
        self.check_finite()
    }

    /// Fuses one measurement at the current filter time.
    pub fn update(&mut self, measurement: &MeasurementKind) -> Result<(), FusionError> {
        match measurement {
            MeasurementKind::Pose7 { value, std } => {
                if value.iter().chain(std.iter()).any(|v| !v.is_finite()) {
                    return Err(FusionError::InvalidMeasurement {
                        reason: "pose measurement must be finite",
                    });
                }
                if std.iter().any(|&s| s <= 0.0) {
                    return Err(FusionError::InvalidMeasurement {
                        reason: "pose measurement stds must be positive",
                    });
                }
                let mut z = SVector::<f64, 7>::from_column_slice(value);
                let dot: f64 = (0..4).map(|i| z[3 + i] * self.state.state[IQ + i]).sum();
                if dot < 0.0 {
                    for i in 0..4 {
                        z[3 + i] = -z[3 + i];
                    }
                }
                let mut h = SMatrix::<f64, 7, STATE_DIM>::zeros();
                let mut predicted = SVector::<f64, 7>::zeros();
                for i in 0..3 {
                    h[(i, IP + i)] = 1.0;
                    predicted[i] = self.state.state[IP + i];
                }
                for i in 0..4 {
                    h[(3 + i, IQ + i)] = 1.0;
                    predicted[3 + i] = self.state.state[IQ + i];
                }
                let mut r = SVector::<f64, 7>::zeros();
                for i in 0..7 {
                    r[i] = std[i] * std[i];
                }
                self.kalman_step(z - predicted, h, r)
            }
            MeasurementKind::Compass { heading } => {
                if !heading.is_finite() {
                    return Err(FusionError::InvalidMeasurement {
                        reason: "compass heading must be finite",
                    });
                }
                let q = self.state.quaternion();
                let (a, b) = heading_terms(q);
                let denom = a * a + b * b;
                if denom < 1e-12 {
                    return Err(FusionError::DegenerateHeading);
                }
                let predicted = a.atan2(b);
                let da = [-q.x, -q.w, q.z, q.y];
                let db = [q.y, q.z, q.w, q.x];
                let mut h = SMatrix::<f64, 1, STATE_DIM>::zeros();
                for i in 0..4 {
                    h[(0, IQ + i)] = 2.0 * (b * da[i] - a * db[i]) / denom;
                }
                let y = SVector::<f64, 1>::new(wrap_angle(heading - predicted));
                let r = SVector::<f64, 1>::new(self.config.compass_noise_std.powi(2));
                self.kalman_step(y, h, r)
            }
            MeasurementKind::Altimeter { z } => {
                if !z.is_finite() {
                    return Err(FusionError::InvalidMeasurement {
                        reason: "altimeter reading must be finite",
                    });
                }
                let mut h = SMatrix::<f64, 1, STATE_DIM>::zeros();
                h[(0, IP + 2)] = 1.0;
                let y = SVector::<f64, 1>::new(z - self.state.state[IP + 2]);
                let r = SVector::<f64, 1>::new(self.config.altimeter_noise_std.powi(2));
                self.kalman_step(y, h, r)
            }
        }
    }

    /// Joseph-form Kalman update from a precomputed innovation.
    fn kalman_step<const M: usize>(
        &mut self,
        innovation: SVector<f64, M>,
        h: SMatrix<f64, M, STATE_DIM>,
        r_var: SVector<f64, M>,
    ) -> Result<(), FusionError> {
        let r = SMatrix::<f64, M, M>::from_diagonal(&r_var);
        let s = h * self.state.cov * h.transpose() + r;
        let chol = nalgebra::Cholesky::new(s).ok_or(FusionError::SingularInnovationCovariance)?;
        let gain = self.state.cov * h.transpose() * chol.inverse();
        self.state.state += gain * innovation;
        let jkh = Mat13::identity() - gain * h;
        self.state.cov = jkh * self.state.cov * jkh.transpose() + gain * r * gain.transpose();
        self.normalize_quaternion()?;
        self.symmetrize();
        self.check_finite()
    }

    fn normalize_quaternion(&mut self) -> Result<(), FusionError> {
        let n = (0..4).map(|i| self.state.state[IQ + i].powi(2)).sum::<f64>().sqrt();
        if !(n > 1e-12) {
            return Err(FusionError::DegenerateQuaternion);
        }
        for i in 0..4 {
            self.state.state[IQ + i] /= n;
        }
        Ok(())
    }

    fn symmetrize(&mut self) {
        let c = self.state.cov;
        self.state.cov = (c + c.transpose()) * 0.5;
    }

    fn check_finite(&self) -> Result<(), FusionError> {
        if self.state.state.iter().chain(self.state.cov.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(FusionError::NonFiniteState)
        }
    }
}

/// Runs the filter over time-ordered measurements. The returned
/// trajectory starts with the initial state, then carries one state
/// per fused measurement. Equal timestamps are allowed (simultaneous
/// sensors); going backwards or bridging more than
/// [`FilterConfig::max_gap`] is an error.
pub fn run_filter(
    initial: &FilterState,
    config: &FilterConfig,
    measurements: &[TimedMeasurement],
) -> Result<Vec<FilterState>, FusionError> {
    let mut ekf = Ekf::new(config.clone(), initial.clone())?;
    let mut out = Vec::with_capacity(measurements.len() + 1);
    out.push(ekf.state.clone());
    for (index, m) in measurements.iter().enumerate() {
        if !m.timestamp.is_finite() {
            return Err(FusionError::InvalidMeasurement {
                reason: "measurement timestamp must be finite",
            });
        }
        let dt = m.timestamp - ekf.state.time;
        if dt < 0.0 {
            return Err(FusionError::OutOfOrder { index });
        }
        if dt > config.max_gap {
            return Err(FusionError::GapExceeded { index, dt });
        }
        ekf.predict(dt)?;
        ekf.state.time = m.timestamp;
        ekf.update(&m.kind)?;
        out.push(ekf.state.clone());
    }
    Ok(out)
}

/// Normalized estimation error squared on the `[p, v, w]` marginal
/// (the quaternion block is excluded because its unit constraint makes
/// the 4-component marginal singular).
pub fn nees(
    state: &FilterState,
    truth_position: &Vector3<f64>,
    truth_velocity: &Vector3<f64>,
    truth_rate: &Vector3<f64>,
) -> Result<f64, FusionError> {
    const IDX: [usize; 9] = [0, 1, 2, 3, 4, 5, 10, 11, 12];
    let mut err = SVector::<f64, 9>::zeros();
    for i in 0..3 {
        err[i] = state.state[IP + i] - truth_position[i];
        err[3 + i] = state.state[IV + i] - truth_velocity[i];
        err[6 + i] = state.state[IW + i] - truth_rate[i];
    }
    let mut marginal = SMatrix::<f64, 9, 9>::zeros();
    for (r, &sr) in IDX.iter().enumerate() {
        for (c, &sc) in IDX.iter().enumerate() {
            marginal[(r, c)] = state.cov[(sr, sc)];
        }
    }
    let chol = nalgebra::Cholesky::new(marginal).ok_or(FusionError::SingularCovariance)?;
    let solved = chol.solve(&err);
    Ok(err.dot(&solved))
}

/// Turns one camera frame into a [`MeasurementKind::Pose7`] via Monte
/// Carlo dropout: the ensemble mean is the measurement, the ensemble
/// spread its noise. Positions are denormalized into world
/// coordinates through `norm`; stds are floored at `noise_floor`.
pub fn estimator_measurement(
    params: &NetParams,
    image: &Image,
    mc_samples: usize,
    seed: u64,
    noise_floor: f64,
    norm: &PoseNormalization,
    timestamp: f64,
) -> Result<TimedMeasurement, FusionError> {
    if !(noise_floor > 0.0) || !noise_floor.is_finite() {
        return Err(FusionError::InvalidConfig { reason: "noise floor must be positive" });
    }
    let pred = params.mc_dropout_predict(image, mc_samples, seed)?;
    let pose = pred.pose()?;
    let position = norm.denormalize_position(pose.position);
    let he = norm.half_extent();
    let q = pose.orientation;
    let value = [position.x, position.y, position.z, q.w, q.x, q.y, q.z];
    let mut std = [0.0; 7];
    for i in 0..3 {
        std[i] = (pred.std[i] * he[i]).max(noise_floor);
    }
    for i in 3..7 {
        std[i] = pred.std[i].max(noise_floor);
    }
    Ok(TimedMeasurement {
        timestamp,
        kind: MeasurementKind::Pose7 { value, std },
    })
}
