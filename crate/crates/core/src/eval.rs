//! Trajectory evaluation: per-frame error records, summaries, and
//! error CDFs for relocalization experiments.
//!
//! Angular quantities are radians throughout; any degree conversion
//! belongs to the caller's boundary.

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::geom::{angular_distance, GeomError, Pose};
use crate::loss::{equivalent_translation, AngleForm, LossError};

#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    EmptyInput,
    LengthMismatch { expected: usize, got: usize },
    /// Estimate and truth disagree about the time axis at `index`.
    TimestampMismatch { index: usize },
    NonFinite { index: usize },
    Loss(LossError),
    Geom(GeomError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::EmptyInput => write!(f, "no records to evaluate"),
            EvalError::LengthMismatch { expected, got } => {
                write!(f, "expected {expected} samples, got {got}")
            }
            EvalError::TimestampMismatch { index } => {
                write!(f, "timestamps diverge at sample {index}")
            }
            EvalError::NonFinite { index } => write!(f, "non-finite value at sample {index}"),
            EvalError::Loss(e) => write!(f, "composite loss failed: {e}"),
            EvalError::Geom(e) => write!(f, "geometry error: {e}"),
        }
    }
}

impl From<LossError> for EvalError {
    fn from(e: LossError) -> Self {
        EvalError::Loss(e)
    }
}

impl From<GeomError> for EvalError {
    fn from(e: GeomError) -> Self {
        EvalError::Geom(e)
    }
}

/// Position and orientation error of one estimated pose.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorRecord {
    pub timestamp: f64,
    /// Euclidean position error, meters.
    pub position_error: f64,
    /// Geodesic orientation error, radians.
    pub angular_error: f64,
}

/// One step of an empirical CDF: the fraction of samples with value
/// `<= value`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CdfPoint {
    pub value: f64,
    pub fraction: f64,
}

/// Wall-clock accounting for a processing run.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimingStats {
    pub wall_seconds: f64,
    pub items: usize,
    pub items_per_second: f64,
}

impl TimingStats {
    pub fn new(wall_seconds: f64, items: usize) -> Self {
        let items_per_second =
            if wall_seconds > 0.0 { items as f64 / wall_seconds } else { f64::INFINITY };
        TimingStats { wall_seconds, items, items_per_second }
    }
}

/// Summary statistics over a set of [`ErrorRecord`]s.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentReport {
    pub count: usize,
    pub mean_position_error: f64,
    pub median_position_error: f64,
    pub rmse_position: f64,
    pub mean_angular_error: f64,
    pub median_angular_error: f64,
    pub mean_composite_loss: f64,
    pub median_composite_loss: f64,
    /// Equivalent-translation weight used for the composite loss.
    pub loss_distance: f64,
    pub angle_form: AngleForm,
    pub position_cdf: Vec<CdfPoint>,
    pub angular_cdf: Vec<CdfPoint>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none", default))]
    pub timing: Option<TimingStats>,
}

/// Compares aligned estimate/truth pose streams sample by sample.
/// Timestamps must agree within `1e-9` s; use resampling to align
/// streams recorded on different clocks.
pub fn pose_errors(
    estimates: &[(f64, Pose)],
    truth: &[(f64, Pose)],
) -> Result<Vec<ErrorRecord>, EvalError> {
    if estimates.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if estimates.len() != truth.len() {
        return Err(EvalError::LengthMismatch { expected: truth.len(), got: estimates.len() });
    }
    let mut out = Vec::with_capacity(estimates.len());
    for (index, ((te, est), (tt, gt))) in estimates.iter().zip(truth).enumerate() {
        if !te.is_finite() || !tt.is_finite() {
            return Err(EvalError::NonFinite { index });
        }
        if (te - tt).abs() > 1e-9 {
            return Err(EvalError::TimestampMismatch { index });
        }
        let position_error = (est.position - gt.position).norm();
        let angular_error = angular_distance(est.orientation, gt.orientation)?;
        if !position_error.is_finite() {
            return Err(EvalError::NonFinite { index });
        }
        out.push(ErrorRecord { timestamp: *te, position_error, angular_error });
    }
    Ok(out)
}

/// Position error plus the equivalent translation of the angular
/// error at working distance `d` — the single number the pose loss
/// optimizes, reused as an evaluation metric.
pub fn composite_loss(record: &ErrorRecord, d: f64, form: AngleForm) -> Result<f64, EvalError> {
    Ok(record.position_error + equivalent_translation(d, record.angular_error, form)?)
}

/// Median of `values`; even counts average the two middle elements.
pub fn median(values: &[f64]) -> Result<f64, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite { index });
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        Ok(sorted[n / 2])
    } else {
        Ok(0.5 * (sorted[n / 2 - 1] + sorted[n / 2]))
    }
}

/// Empirical CDF with duplicate values collapsed to their highest
/// fraction, so the result is strictly increasing in `value`.
pub fn error_cdf(values: &[f64]) -> Result<Vec<CdfPoint>, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite { index });
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, &value) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.value == value => last.fraction = fraction,
            _ => out.push(CdfPoint { value, fraction }),
        }
    }
    Ok(out)
}

/// Root-mean-square of the position errors.
pub fn trajectory_rmse(records: &[ErrorRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let sum: f64 = records.iter().map(|r| r.position_error * r.position_error).sum();
    Ok((sum / records.len() as f64).sqrt())
}

/// Builds the full report: means, medians, RMSE, composite losses at
/// working distance `d`, and both error CDFs.
pub fn evaluate(
    records: &[ErrorRecord],
    d: f64,
    form: AngleForm,
    timing: Option<TimingStats>,
) -> Result<ExperimentReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = records.len() as f64;
    let pos: Vec<f64> = records.iter().map(|r| r.position_error).collect();
    let ang: Vec<f64> = records.iter().map(|r| r.angular_error).collect();
    let composite: Vec<f64> = records
        .iter()
        .map(|r| composite_loss(r, d, form))
        .collect::<Result<_, _>>()?;
    Ok(ExperimentReport {
        count: records.len(),
        mean_position_error: pos.iter().sum::<f64>() / n,
        median_position_error: median(&pos)?,
        rmse_position: trajectory_rmse(records)?,
        mean_angular_error: ang.iter().sum::<f64>() / n,
        median_angular_error: median(&ang)?,
        mean_composite_loss: composite.iter().sum::<f64>() / n,
        median_composite_loss: median(&composite)?,
        loss_distance: d,
        angle_form: form,
        position_cdf: error_cdf(&pos)?,
        angular_cdf: error_cdf(&ang)?,
        timing,
    })
}
