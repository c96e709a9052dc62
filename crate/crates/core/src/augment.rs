//! Training-set augmentation: synthesized survey poses rendered as
//! extra trials, and photometric jitter applied on the fly.
//!
//! Pose synthesis replays a surveyed trajectory at new depths and new
//! standoff ranges — the cheap stand-in for flying more trials. Range
//! scaling is radial about the structure's vertical axis; depth
//! offsets translate along z. Orientations are kept from the base
//! poses: horizontal bearing to the structure is invariant under the
//! radial scale, and re-aiming is deliberately not supported.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{SampleSource, TrialDataset};
use crate::geom::Pose;
use crate::scene::{
    generate_trial, Aabb, CameraIntrinsics, Image, SceneError, SceneSpec, WaterColumn,
};

#[derive(Clone, Debug, PartialEq)]
pub enum AugmentError {
    EmptyBase,
    /// A base pose sits on the structure's vertical axis (radial
    /// scaling is directionless there), or a synthesized camera fell
    /// inside the structure.
    DegenerateGeometry { index: usize },
    InvalidConfig { reason: &'static str },
    /// Synthesis keeps base orientations; re-aiming is not available.
    UnsupportedOrientationMode,
    Scene(SceneError),
}

impl fmt::Display for AugmentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugmentError::EmptyBase => write!(f, "no base poses to synthesize from"),
            AugmentError::DegenerateGeometry { index } => {
                write!(f, "synthesized pose {index} is degenerate (on the structure axis or inside the structure)")
            }
            AugmentError::InvalidConfig { reason } => write!(f, "invalid augmentation config: {reason}"),
            AugmentError::UnsupportedOrientationMode => {
                write!(f, "pose synthesis only supports keeping base orientations")
            }
            AugmentError::Scene(e) => write!(f, "augmented render failed: {e}"),
        }
    }
}

impl From<SceneError> for AugmentError {
    fn from(e: SceneError) -> Self {
        AugmentError::Scene(e)
    }
}

/// Grid of synthetic viewpoints: every `(depth_offset, range_scale)`
/// pair is applied to every base pose.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoseSynthesisConfig {
    /// Added to the z coordinate (negative values move deeper).
    pub depth_offsets: Vec<f64>,
    /// Multiplies the horizontal distance to the structure axis.
    pub range_scales: Vec<f64>,
    /// Must stay `true`; present so configs state the choice.
    pub keep_orientation: bool,
}

impl PoseSynthesisConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if !self.keep_orientation {
            return Err(AugmentError::UnsupportedOrientationMode);
        }
        if self.depth_offsets.is_empty() || self.range_scales.is_empty() {
            return Err(AugmentError::InvalidConfig {
                reason: "depth offsets and range scales must each list at least one value",
            });
        }
        if self.depth_offsets.iter().any(|v| !v.is_finite()) {
            return Err(AugmentError::InvalidConfig { reason: "depth offsets must be finite" });
        }
        if self.range_scales.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(AugmentError::InvalidConfig { reason: "range scales must be positive" });
        }
        Ok(())
    }
}

/// Synthesizes the augmentation grid over `base`, validated against
/// the structure bounds: a synthetic camera may not end up inside the
/// structure's bounding box. The identity cell `(offset 0, scale 1)`
/// is skipped — it would only duplicate the base poses.
///
/// Output order groups one full copy of the base trajectory per
/// `(offset, scale)` pair, offsets outermost, so each group reads as
/// one synthetic trial.
pub fn synthesize_poses(
    base: &[Pose],
    cfg: &PoseSynthesisConfig,
    bounds: &Aabb,
) -> Result<Vec<Pose>, AugmentError> {
    cfg.validate()?;
    if base.is_empty() {
        return Err(AugmentError::EmptyBase);
    }
    let axis = bounds.center();
    let mut out = Vec::with_capacity(base.len() * cfg.depth_offsets.len() * cfg.range_scales.len());
    for &offset in &cfg.depth_offsets {
        for &scale in &cfg.range_scales {
            if offset == 0.0 && scale == 1.0 {
                continue;
            }
            for pose in base {
                let p = pose.position;
                let dx = p.x - axis.x;
                let dy = p.y - axis.y;
                if dx * dx + dy * dy < 1e-18 {
                    return Err(AugmentError::DegenerateGeometry { index: out.len() });
                }
                let position = Vector3::new(
                    axis.x + scale * dx,
                    axis.y + scale * dy,
                    p.z + offset,
                );
                let inside = position.x > bounds.min.x
                    && position.x < bounds.max.x
                    && position.y > bounds.min.y
                    && position.y < bounds.max.y
                    && position.z > bounds.min.z
                    && position.z < bounds.max.z;
                if inside {
                    return Err(AugmentError::DegenerateGeometry { index: out.len() });
                }
                out.push(Pose::new(position, pose.orientation));
            }
        }
    }
    Ok(out)
}

/// Renders synthesized poses into a trial tagged
/// [`SampleSource::Augmented`].
pub fn render_augmented(
    scene: &SceneSpec,
    camera: &CameraIntrinsics,
    water: &WaterColumn,
    poses: &[Pose],
    rate_hz: f64,
    seed: u64,
) -> Result<TrialDataset, AugmentError> {
    let trial = generate_trial(scene, camera, water, poses, rate_hz, seed)?;
    let samples = trial
        .into_samples()
        .into_iter()
        .map(|mut s| {
            s.source = SampleSource::Augmented;
            s
        })
        .collect();
    Ok(TrialDataset::new(samples).expect("restamped samples stay ordered"))
}

/// Photometric jitter intervals. Each interval must contain its
/// identity value (0 for brightness, 1 for the multiplicative terms),
/// so the clean image always stays inside the augmentation family.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ColorJitterConfig {
    /// Additive offset interval.
    pub brightness: (f64, f64),
    /// Contrast interval, scaling about mid-gray.
    pub contrast: (f64, f64),
    /// Per-channel gain interval.
    pub channel_gain: (f64, f64),
}

impl ColorJitterConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        for ((lo, hi), identity, reason) in [
            (self.brightness, 0.0, "brightness interval must contain 0"),
            (self.contrast, 1.0, "contrast interval must contain 1"),
            (self.channel_gain, 1.0, "channel gain interval must contain 1"),
        ] {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(AugmentError::InvalidConfig { reason: "jitter interval is not ordered" });
            }
            if identity < lo || identity > hi {
                return Err(AugmentError::InvalidConfig { reason });
            }
        }
        Ok(())
    }
}

/// Draws one jitter realization from `seed` and applies it:
/// contrast about mid-gray, then brightness, then per-channel gain,
/// clamped to `[0, 1]`. Zero-width identity intervals reproduce the
/// input bit for bit.
pub fn color_jitter(image: &Image, cfg: &ColorJitterConfig, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let brightness = rng.random_range(cfg.brightness.0..=cfg.brightness.1);
    let contrast = rng.random_range(cfg.contrast.0..=cfg.contrast.1);
    let channels = image.channels() as usize;
    let mut gains = [1.0; 3];
    for g in gains.iter_mut().take(channels) {
        *g = rng.random_range(cfg.channel_gain.0..=cfg.channel_gain.1);
    }
    let mut out = image.clone();
    if brightness == 0.0 && contrast == 1.0 && gains[..channels].iter().all(|&g| g == 1.0) {
        return out;
    }
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let g = gains[i % channels];
        let adjusted = (((*v - 0.5) * contrast + 0.5) + brightness) * g;
        *v = adjusted.clamp(0.0, 1.0);
    }
    out
}
