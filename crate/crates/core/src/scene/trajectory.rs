//! Survey trajectory planning and trial dataset generation.
//!
//! Trajectories imitate the lawnmower passes an ROV flies around a
//! structure: horizontal mode stacks rectangular loops at the standoff
//! distance, stepping down one line spacing per loop; vertical mode
//! walks azimuthal stations around the structure, sweeping each one
//! top-to-bottom. Both keep the camera aimed at the structure.

use alloc::vec::Vec;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::data::{SampleSource, TimedSample, TrialDataset};
use crate::geom::{look_at, Pose};
use crate::rng::derive_seed;
use crate::scene::{render, CameraIntrinsics, SceneError, SceneSpec, WaterColumn};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SweepMode {
    /// Stacked rectangular loops around the structure.
    Horizontal,
    /// Vertical sweeps at azimuthal stations around the structure.
    Vertical,
}

/// Survey pattern parameters.
///
/// The pattern is centered on `depth` and spans the structure's own
/// height, so a trial sees the structure from every level while its
/// mean depth stays at the configured value.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LawnmowerConfig {
    /// Mean depth of the pattern (z coordinate, negative underwater).
    pub depth: f64,
    /// Clearance between the path and the structure bounding box, m.
    pub standoff: f64,
    /// Spacing between loops (horizontal) or stations (vertical), m.
    pub line_spacing: f64,
    /// Spacing between consecutive samples along the path, m.
    pub sample_spacing: f64,
    pub mode: SweepMode,
}

impl LawnmowerConfig {
    fn validate(&self) -> Result<(), SceneError> {
        if !self.depth.is_finite() {
            return Err(SceneError::InvalidTrajectory { reason: "depth must be finite" });
        }
        for (v, reason) in [
            (self.standoff, "standoff must be positive"),
            (self.line_spacing, "line spacing must be positive"),
            (self.sample_spacing, "sample spacing must be positive"),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SceneError::InvalidTrajectory { reason });
            }
        }
        Ok(())
    }
}

/// Number of samples at `k·spacing` strictly inside a run of length
/// `len` (the far end belongs to the next leg).
fn samples_along(len: f64, spacing: f64) -> usize {
    (len / spacing - 1e-9).floor() as usize + 1
}

/// Number of offsets `k·spacing` in `[0, len]`, both ends inclusive
/// when `len` is an exact multiple.
fn levels_across(len: f64, spacing: f64) -> usize {
    (len / spacing + 1e-9).floor() as usize + 1
}

/// Plans a lawnmower survey around the structure in `scene`.
///
/// Sample counts are exact functions of the geometry: a horizontal
/// pattern has `floor(H/line_spacing)+1` loops (H the structure
/// height), each contributing `2·(n(Lx) + n(Ly))` poses where
/// `n(L) = ⌈L/sample_spacing⌉` counts the strictly-interior samples of
/// one side of the `Lx × Ly` standoff rectangle. Loop direction
/// alternates level to level.
pub fn lawnmower_trajectory(scene: &SceneSpec, cfg: &LawnmowerConfig) -> Result<Vec<Pose>, SceneError> {
    cfg.validate()?;
    scene.validate()?;
    let bounds = scene.structure_bounds()?;
    let center = bounds.center();
    let ext = bounds.extents();
    let height = ext.z;
    let z_top = cfg.depth + height / 2.0;
    let aim = |pos: Vector3<f64>| {
        let target = Vector3::new(center.x, center.y, pos.z.clamp(bounds.min.z, bounds.max.z));
        Pose::new(pos, look_at(pos, target))
    };

    let mut poses = Vec::new();
    match cfg.mode {
        SweepMode::Horizontal => {
            let lo = Vector3::new(bounds.min.x - cfg.standoff, bounds.min.y - cfg.standoff, 0.0);
            let hi = Vector3::new(bounds.max.x + cfg.standoff, bounds.max.y + cfg.standoff, 0.0);
            let n_levels = levels_across(height, cfg.line_spacing);
            for level in 0..n_levels {
                let z = z_top - level as f64 * cfg.line_spacing;
                let corners = [
                    Vector3::new(lo.x, lo.y, z),
                    Vector3::new(hi.x, lo.y, z),
                    Vector3::new(hi.x, hi.y, z),
                    Vector3::new(lo.x, hi.y, z),
                ];
                for leg in 0..4 {
                    let (a, b) = if level % 2 == 0 {
                        (corners[leg], corners[(leg + 1) % 4])
                    } else {
                        // Reverse travel direction on odd levels.
                        (corners[(4 - leg) % 4], corners[(3 - leg) % 4])
                    };
                    let len = (b - a).norm();
                    let dir = (b - a) / len;
                    for k in 0..samples_along(len, cfg.sample_spacing) {
                        poses.push(aim(a + dir * (k as f64 * cfg.sample_spacing)));
                    }
                }
            }
        }
        SweepMode::Vertical => {
            let radius = cfg.standoff + ext.x.max(ext.y) / 2.0;
            let circumference = 2.0 * core::f64::consts::PI * radius;
            let n_stations = samples_along(circumference, cfg.line_spacing);
            let n_z = levels_across(height, cfg.sample_spacing);
            for station in 0..n_stations {
                let theta = station as f64 * cfg.line_spacing / radius;
                let (s, c) = theta.sin_cos();
                for j in 0..n_z {
                    // Sweep down on even stations, up on odd ones.
                    let step = if station % 2 == 0 { j } else { n_z - 1 - j };
                    let z = z_top - step as f64 * cfg.sample_spacing;
                    poses.push(aim(Vector3::new(center.x + radius * c, center.y + radius * s, z)));
                }
            }
        }
    }
    Ok(poses)
}

/// Renders one trial: the trajectory sampled at `rate_hz`, each pose
/// paired with its rendered camera frame and ground truth.
///
/// Image `k` is rendered with a seed derived from `(seed, k)`, so
/// trials are reproducible and frames are independent draws.
pub fn generate_trial(
    scene: &SceneSpec,
    camera: &CameraIntrinsics,
    water: &WaterColumn,
    trajectory: &[Pose],
    rate_hz: f64,
    seed: u64,
) -> Result<TrialDataset, SceneError> {
    if trajectory.is_empty() {
        return Err(SceneError::InvalidTrajectory { reason: "empty trajectory" });
    }
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        return Err(SceneError::InvalidTrajectory { reason: "sample rate must be positive" });
    }
    let mut samples = Vec::with_capacity(trajectory.len());
    for (k, pose) in trajectory.iter().enumerate() {
        let image = render(scene, pose, camera, water, derive_seed(seed, k as u64))?;
        samples.push(TimedSample {
            timestamp: k as f64 / rate_hz,
            image: Some(image),
            pose: Some(*pose),
            source: SampleSource::Camera,
        });
    }
    Ok(TrialDataset::new(samples).expect("uniform grid timestamps are strictly increasing"))
}
