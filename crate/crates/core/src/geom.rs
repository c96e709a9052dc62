//! Quaternion and pose algebra.
//!
//! Quaternions are stored `(w, x, y, z)` with the scalar part first and
//! follow the Hamilton product convention. Rotations act on vectors as
//! `q v q*`. Unit quaternions double-cover rotations; every metric here
//! folds `q` and `-q` together.

use core::fmt;
use core::ops::{Mul, Neg};

use nalgebra::Vector3;
// Float supplies f64 math under no_std. A dependency graph that links
// std anywhere makes std's inherent methods shadow it, so the import
// looks unused in test builds.
#[allow(unused_imports)]
use num_traits::Float;

/// Norms at or below this are treated as degenerate.
pub const QUAT_NORM_EPS: f64 = 1e-12;

/// Errors from quaternion operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeomError {
    /// A quaternion with near-zero norm cannot be normalized or
    /// compared by angle.
    ZeroNormQuaternion,
}

impl fmt::Display for GeomError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeomError::ZeroNormQuaternion => write!(f, "quaternion norm is too close to zero"),
        }
    }
}

/// Hamilton quaternion, scalar part first.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    /// Rotation of `angle` radians about `axis`. The axis is normalized
    /// internally; a near-zero axis yields the identity rotation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n <= QUAT_NORM_EPS {
            return Quaternion::IDENTITY;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        let u = axis / n;
        Quaternion::new(c, s * u.x, s * u.y, s * u.z)
    }

    /// Exponential map of a rotation vector (axis scaled by angle),
    /// with a series branch near zero so the map stays smooth.
    pub fn from_scaled_axis(v: Vector3<f64>) -> Self {
        let theta2 = v.norm_squared();
        if theta2 < 1e-20 {
            let g = 0.5 - theta2 / 48.0;
            let q = Quaternion::new(1.0 - theta2 / 8.0, g * v.x, g * v.y, g * v.z);
            return q.normalize().unwrap_or(Quaternion::IDENTITY);
        }
        let theta = theta2.sqrt();
        Quaternion::from_axis_angle(v, theta)
    }

    /// Builds the quaternion whose rotation maps the world axes onto
    /// the given orthonormal frame (`x_axis`, `y_axis`, `z_axis` are
    /// the frame's axes expressed in world coordinates).
    pub fn from_basis(x_axis: Vector3<f64>, y_axis: Vector3<f64>, z_axis: Vector3<f64>) -> Self {
        // Shepperd's method on the column-major direction cosines.
        let (r00, r10, r20) = (x_axis.x, x_axis.y, x_axis.z);
        let (r01, r11, r21) = (y_axis.x, y_axis.y, y_axis.z);
        let (r02, r12, r22) = (z_axis.x, z_axis.y, z_axis.z);
        let trace = r00 + r11 + r22;
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quaternion::new(0.25 * s, (r21 - r12) / s, (r02 - r20) / s, (r10 - r01) / s)
        } else if r00 > r11 && r00 > r22 {
            let s = (1.0 + r00 - r11 - r22).sqrt() * 2.0;
            Quaternion::new((r21 - r12) / s, 0.25 * s, (r01 + r10) / s, (r02 + r20) / s)
        } else if r11 > r22 {
            let s = (1.0 + r11 - r00 - r22).sqrt() * 2.0;
            Quaternion::new((r02 - r20) / s, (r01 + r10) / s, 0.25 * s, (r12 + r21) / s)
        } else {
            let s = (1.0 + r22 - r00 - r11).sqrt() * 2.0;
            Quaternion::new((r10 - r01) / s, (r02 + r20) / s, (r12 + r21) / s, 0.25 * s)
        };
        q.normalize().unwrap_or(Quaternion::IDENTITY)
    }

    pub fn norm_squared(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Four-component dot product.
    pub fn dot(self, other: Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn conjugate(self) -> Quaternion {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn scale(self, k: f64) -> Quaternion {
        Quaternion::new(self.w * k, self.x * k, self.y * k, self.z * k)
    }

    pub fn add(self, other: Quaternion) -> Quaternion {
        Quaternion::new(
            self.w + other.w,
            self.x + other.x,
            self.y + other.y,
            self.z + other.z,
        )
    }

    pub fn normalize(self) -> Result<Quaternion, GeomError> {
        let n = self.norm();
        if n <= QUAT_NORM_EPS {
            return Err(GeomError::ZeroNormQuaternion);
        }
        Ok(self.scale(1.0 / n))
    }

    /// Rotates a vector, assuming `self` is unit norm.
    pub fn rotate_vector(self, v: Vector3<f64>) -> Vector3<f64> {
        let u = Vector3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(&v);
        v + self.w * t + u.cross(&t)
    }

    /// Rotation angle in radians to the identity, folding the double
    /// cover; `self` is normalized internally.
    pub fn rotation_angle(self) -> Result<f64, GeomError> {
        let n = self.normalize()?;
        Ok(2.0 * n.w.abs().min(1.0).acos())
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product `self ⊗ rhs`.
    fn mul(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(
            self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        )
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

/// Geodesic angle in radians between two orientations.
///
/// Both inputs are normalized internally; the |scalar| fold makes the
/// result invariant to the sign of either quaternion and bounds it to
/// `[0, π]`.
pub fn angular_distance(q: Quaternion, q_hat: Quaternion) -> Result<f64, GeomError> {
    let r = relative_scalar(q, q_hat)?;
    Ok(2.0 * r.abs().min(1.0).acos())
}

/// Linear surrogate for [`angular_distance`]: `(π/2)·(1 − |r|)` where
/// `r` is the scalar part of the relative rotation. Cheap, exact at
/// zero angle, and monotone in the true angle.
pub fn angular_distance_approx(q: Quaternion, q_hat: Quaternion) -> Result<f64, GeomError> {
    let r = relative_scalar(q, q_hat)?;
    Ok(core::f64::consts::FRAC_PI_2 * (1.0 - r.abs().min(1.0)))
}

/// Scalar part of `q ⊗ q̂*` after normalizing both; equals the cosine
/// of half the rotation angle between them (up to sign).
fn relative_scalar(q: Quaternion, q_hat: Quaternion) -> Result<f64, GeomError> {
    let a = q.normalize()?;
    let b = q_hat.normalize()?;
    // scalar(a ⊗ b*) collapses to the 4-dot of a and b.
    Ok(a.dot(b))
}

/// Spherical linear interpolation between unit quaternions, always
/// along the shorter arc. Falls back to normalized lerp when the
/// endpoints are nearly aligned.
pub fn slerp(a: Quaternion, b: Quaternion, t: f64) -> Quaternion {
    let mut d = a.dot(b);
    let mut b = b;
    if d < 0.0 {
        b = -b;
        d = -d;
    }
    let d = d.min(1.0);
    if d > 1.0 - 1e-6 {
        let q = a.scale(1.0 - t).add(b.scale(t));
        return q.normalize().unwrap_or(a);
    }
    let theta = d.acos();
    let s = theta.sin();
    let wa = ((1.0 - t) * theta).sin() / s;
    let wb = (t * theta).sin() / s;
    a.scale(wa).add(b.scale(wb)).normalize().unwrap_or(a)
}

/// Rigid camera pose: position in meters plus orientation mapping
/// camera coordinates into the world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Quaternion,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: Quaternion) -> Self {
        Pose { position, orientation }
    }

    pub fn identity() -> Self {
        Pose::new(Vector3::zeros(), Quaternion::IDENTITY)
    }
}

/// Orientation of a camera at `eye` looking at `target`, using the
/// computer-vision convention: camera `+z` points at the target, `+x`
/// right, `+y` down, with world `+z` as up. When the view direction is
/// (anti)parallel to world up, world `+x` breaks the tie; when `eye`
/// and `target` coincide, the identity orientation is returned.
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> Quaternion {
    let to = target - eye;
    if to.norm() <= QUAT_NORM_EPS {
        return Quaternion::IDENTITY;
    }
    let forward = to.normalize();
    let up = Vector3::new(0.0, 0.0, 1.0);
    let mut right = forward.cross(&up);
    if right.norm() <= 1e-9 {
        right = forward.cross(&Vector3::new(1.0, 0.0, 0.0));
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    Quaternion::from_basis(right, down, forward)
}
