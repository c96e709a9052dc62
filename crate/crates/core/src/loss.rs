//! Geometry-aware pose regression losses.
//!
//! Two composite losses over a predicted pose `(p̂, q̂)` against ground
//! truth `(p, q)`:
//!
//! * β-loss: `‖p̂ − p‖ + β·‖q − q̂/‖q̂‖‖` — the classic weighted sum of
//!   position error and raw quaternion distance. β is unitless and has
//!   to be re-tuned per scene scale.
//! * d-loss: `‖p̂ − p‖ + d·L_θ` — the angular error `L_θ` (radians) is
//!   converted into meters by the working distance `d`, so both terms
//!   share units and `d` has a physical reading: the camera-to-scene
//!   distance at which a rotation displaces as much image content as a
//!   translation of the same loss value.
//!
//! `L_θ` comes in an exact form, `2·acos|r|`, and a cheap linear
//! surrogate `(π/2)(1 − |r|)`, with `r` the scalar part of the relative
//! rotation. Predicted quaternions are normalized inside the loss; the
//! network head stays linear.

use core::f64::consts::FRAC_PI_2;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::geom::{GeomError, Pose, Quaternion, QUAT_NORM_EPS};

/// Index of the position block in a packed 7-vector prediction.
pub const POSITION_RANGE: core::ops::Range<usize> = 0..3;
/// Index of the quaternion block (w, x, y, z) in a packed prediction.
pub const QUATERNION_RANGE: core::ops::Range<usize> = 3..7;

/// Errors from loss evaluation or configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossError {
    ZeroNormQuaternion,
    /// Exact equivalent translation `d·tan θ` is undefined at `θ ≥ π/2`.
    AngleOutOfDomain { theta: f64 },
    InvalidConfig { reason: &'static str },
}

impl fmt::Display for LossError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossError::ZeroNormQuaternion => write!(f, "predicted quaternion norm is too close to zero"),
            LossError::AngleOutOfDomain { theta } => {
                write!(f, "angle {theta} rad is outside [0, π/2) for exact equivalent translation")
            }
            LossError::InvalidConfig { reason } => write!(f, "invalid loss config: {reason}"),
        }
    }
}

impl From<GeomError> for LossError {
    fn from(e: GeomError) -> Self {
        match e {
            GeomError::ZeroNormQuaternion => LossError::ZeroNormQuaternion,
        }
    }
}

/// Which form of the angular term to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AngleForm {
    /// Geodesic angle `2·acos|r|`.
    Exact,
    /// Linear surrogate `(π/2)(1 − |r|)`.
    Approximate,
}

/// Pose loss configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum PoseLoss {
    Beta { beta: f64 },
    Distance { d: f64, angle_form: AngleForm },
}

impl PoseLoss {
    pub fn validate(&self) -> Result<(), LossError> {
        let (value, reason) = match self {
            PoseLoss::Beta { beta } => (*beta, "beta must be finite and positive"),
            PoseLoss::Distance { d, .. } => (*d, "d must be finite and positive"),
        };
        if !value.is_finite() || value <= 0.0 {
            return Err(LossError::InvalidConfig { reason });
        }
        Ok(())
    }
}

/// Euclidean position error in meters.
pub fn position_loss(p: &nalgebra::Vector3<f64>, p_hat: &nalgebra::Vector3<f64>) -> f64 {
    (p_hat - p).norm()
}

/// Raw quaternion distance `‖q − q̂/‖q̂‖‖`; `q` is the unit ground
/// truth, `q̂` an arbitrary non-degenerate prediction.
pub fn quaternion_l2_loss(q: Quaternion, q_hat: Quaternion) -> Result<f64, LossError> {
    let u = q_hat.normalize()?;
    let d = q.add(-u);
    Ok(d.norm())
}

/// Angular error between ground truth and prediction, in radians.
pub fn angular_loss(q: Quaternion, q_hat: Quaternion, form: AngleForm) -> Result<f64, LossError> {
    let v = match form {
        AngleForm::Exact => crate::geom::angular_distance(q, q_hat)?,
        AngleForm::Approximate => crate::geom::angular_distance_approx(q, q_hat)?,
    };
    Ok(v)
}

/// Meters of translation equivalent to an angular error of `theta`
/// radians at working distance `d`: `d·tan θ` exactly, or `d·θ` in the
/// small-angle form. The exact form is undefined from π/2 on.
pub fn equivalent_translation(d: f64, theta: f64, form: AngleForm) -> Result<f64, LossError> {
    match form {
        AngleForm::Exact => {
            if theta >= FRAC_PI_2 {
                return Err(LossError::AngleOutOfDomain { theta });
            }
            Ok(d * theta.tan())
        }
        AngleForm::Approximate => Ok(d * theta),
    }
}

/// Composite loss of a predicted pose against ground truth.
pub fn pose_loss(pred: &Pose, target: &Pose, cfg: &PoseLoss) -> Result<f64, LossError> {
    let mut packed = [0.0; 7];
    packed[0] = pred.position.x;
    packed[1] = pred.position.y;
    packed[2] = pred.position.z;
    packed[3..7].copy_from_slice(&pred.orientation.to_array());
    Ok(pose_loss_value_grad(&packed, target, cfg)?.0)
}

/// Loss and its gradient with respect to a packed 7-vector prediction
/// `[x, y, z, qw, qx, qy, qz]`. The quaternion block is raw network
/// output; normalization happens here and the gradient accounts for it.
///
/// Non-differentiable points (zero position error, zero angle under the
/// exact form) take a zero subgradient.
pub fn pose_loss_value_grad(
    pred: &[f64; 7],
    target: &Pose,
    cfg: &PoseLoss,
) -> Result<(f64, [f64; 7]), LossError> {
    cfg.validate()?;
    let p_hat = nalgebra::Vector3::new(pred[0], pred[1], pred[2]);
    let q_hat = Quaternion::new(pred[3], pred[4], pred[5], pred[6]);
    let n = q_hat.norm();
    if n <= QUAT_NORM_EPS {
        return Err(LossError::ZeroNormQuaternion);
    }
    let u = q_hat.scale(1.0 / n);
    let q = target.orientation;

    let dp = p_hat - target.position;
    let lp = dp.norm();
    let mut grad = [0.0; 7];
    if lp > 1e-12 {
        grad[0] = dp.x / lp;
        grad[1] = dp.y / lp;
        grad[2] = dp.z / lp;
    }

    let (weight, term, dterm_du): (f64, f64, [f64; 4]) = match cfg {
        PoseLoss::Beta { beta } => {
            let diff = u.add(-q);
            let f = diff.norm();
            let g = if f > 1e-12 {
                [diff.w / f, diff.x / f, diff.y / f, diff.z / f]
            } else {
                [0.0; 4]
            };
            (*beta, f, g)
        }
        PoseLoss::Distance { d, angle_form } => {
            let r = q.dot(u);
            let r_abs = r.abs().min(1.0);
            // ∂r/∂u direction before projection; sign folds |r|.
            let sign = if r >= 0.0 { 1.0 } else { -1.0 };
            match angle_form {
                AngleForm::Exact => {
                    let theta = 2.0 * r_abs.acos();
                    let denom = (1.0 - r_abs * r_abs).sqrt();
                    let scale = if denom > 1e-6 { -2.0 * sign / denom } else { 0.0 };
                    let g = [scale * q.w, scale * q.x, scale * q.y, scale * q.z];
                    (*d, theta, g)
                }
                AngleForm::Approximate => {
                    let theta = FRAC_PI_2 * (1.0 - r_abs);
                    let s = -FRAC_PI_2 * sign;
                    let g = [s * q.w, s * q.x, s * q.y, s * q.z];
                    (*d, theta, g)
                }
            }
        }
    };

    // Chain through u = q̂/‖q̂‖: ∂L/∂q̂ = (I − u·uᵀ)·(∂L/∂u) / ‖q̂‖.
    let gu = Quaternion::from_array(dterm_du);
    let proj = gu.add((-u).scale(u.dot(gu)));
    let gq = proj.scale(weight / n);
    grad[3] += gq.w;
    grad[4] += gq.x;
    grad[5] += gq.y;
    grad[6] += gq.z;

    Ok((lp + weight * term, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;

    fn pose(p: [f64; 3], q: Quaternion) -> Pose {
        Pose::new(Vector3::new(p[0], p[1], p[2]), q)
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let t = pose([1.0, -2.0, 0.5], Quaternion::from_axis_angle(Vector3::y(), 0.4));
        for cfg in [
            PoseLoss::Beta { beta: 250.0 },
            PoseLoss::Distance { d: 3.0, angle_form: AngleForm::Exact },
            PoseLoss::Distance { d: 3.0, angle_form: AngleForm::Approximate },
        ] {
            assert_abs_diff_eq!(pose_loss(&t, &t, &cfg).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn distance_loss_matches_hand_value() {
        let q = Quaternion::IDENTITY;
        let q_hat = Quaternion::from_axis_angle(Vector3::x(), 0.2);
        let pred = pose([1.0, 0.0, 0.0], q_hat);
        let target = pose([0.0, 0.0, 0.0], q);
        let cfg = PoseLoss::Distance { d: 3.0, angle_form: AngleForm::Exact };
        assert_abs_diff_eq!(
            pose_loss(&pred, &target, &cfg).unwrap(),
            1.0 + 3.0 * 0.2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn beta_loss_matches_hand_value() {
        let q = Quaternion::IDENTITY;
        let q_hat = Quaternion::new(2.0, 0.0, 0.0, 0.0); // denormalized, same rotation
        let pred = pose([0.0, 3.0, 4.0], q_hat);
        let target = pose([0.0, 0.0, 0.0], q);
        let cfg = PoseLoss::Beta { beta: 10.0 };
        assert_abs_diff_eq!(pose_loss(&pred, &target, &cfg).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn equivalent_translation_forms() {
        assert_abs_diff_eq!(
            equivalent_translation(2.0, 0.3, AngleForm::Exact).unwrap(),
            2.0 * 0.3f64.tan(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            equivalent_translation(2.0, 0.3, AngleForm::Approximate).unwrap(),
            0.6,
            epsilon = 1e-15
        );
        assert!(matches!(
            equivalent_translation(2.0, FRAC_PI_2, AngleForm::Exact),
            Err(LossError::AngleOutOfDomain { .. })
        ));
        assert!(equivalent_translation(2.0, FRAC_PI_2, AngleForm::Approximate).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(PoseLoss::Beta { beta: 0.0 }.validate().is_err());
        assert!(PoseLoss::Distance { d: -1.0, angle_form: AngleForm::Exact }.validate().is_err());
        assert!(PoseLoss::Distance { d: f64::NAN, angle_form: AngleForm::Exact }.validate().is_err());
        assert!(PoseLoss::Beta { beta: 120.0 }.validate().is_ok());
    }

    #[test]
    fn zero_norm_prediction_is_rejected() {
        let target = pose([0.0; 3], Quaternion::IDENTITY);
        let pred = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let cfg = PoseLoss::Beta { beta: 1.0 };
        assert_eq!(
            pose_loss_value_grad(&pred, &target, &cfg),
            Err(LossError::ZeroNormQuaternion)
        );
    }

    #[test]
    fn gradients_match_finite_differences() {
        let target = pose(
            [0.3, -0.7, 1.1],
            Quaternion::from_axis_angle(Vector3::new(0.2, -1.0, 0.5), 0.9),
        );
        let pred = [0.1, -0.5, 1.4, 0.8, -0.2, 0.35, 0.1];
        for cfg in [
            PoseLoss::Beta { beta: 17.0 },
            PoseLoss::Distance { d: 2.5, angle_form: AngleForm::Exact },
            PoseLoss::Distance { d: 2.5, angle_form: AngleForm::Approximate },
        ] {
            let (_, grad) = pose_loss_value_grad(&pred, &target, &cfg).unwrap();
            let h = 1e-6;
            for i in 0..7 {
                let mut lo = pred;
                let mut hi = pred;
                lo[i] -= h;
                hi[i] += h;
                let fl = pose_loss_value_grad(&lo, &target, &cfg).unwrap().0;
                let fh = pose_loss_value_grad(&hi, &target, &cfg).unwrap().0;
                let fd = (fh - fl) / (2.0 * h);
                assert_abs_diff_eq!(grad[i], fd, epsilon = 1e-5);
            }
        }
    }
}
