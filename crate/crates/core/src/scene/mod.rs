//! Procedural underwater scenes and a small ray-cast renderer.
//!
//! Scenes are collections of z-aligned capped cylinders and
//! axis-aligned boxes, each carrying a flat base color modulated by
//! seeded value noise so that geometrically identical members remain
//! visually distinguishable. The renderer adds a water column on top:
//! exponential fog toward a background color, a global brightness bias
//! with per-image jitter, and per-pixel Gaussian sensor noise.

mod render;
mod trajectory;

pub use render::render;
pub use trajectory::{generate_trial, lawnmower_trajectory, LawnmowerConfig, SweepMode};

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;

/// Errors from scene validation, rendering, or trajectory planning.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SceneError {
    EmptyScene,
    InvalidPrimitive { index: usize, reason: &'static str },
    InvalidScene { reason: &'static str },
    InvalidCamera { reason: &'static str },
    InvalidWater { reason: &'static str },
    InvalidImage { reason: &'static str },
    AlreadyGrayscale,
    InvalidTrajectory { reason: &'static str },
}

impl fmt::Display for SceneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneError::EmptyScene => write!(f, "scene contains no primitives"),
            SceneError::InvalidPrimitive { index, reason } => {
                write!(f, "primitive {index}: {reason}")
            }
            SceneError::InvalidScene { reason } => write!(f, "invalid scene: {reason}"),
            SceneError::InvalidCamera { reason } => write!(f, "invalid camera: {reason}"),
            SceneError::InvalidWater { reason } => write!(f, "invalid water column: {reason}"),
            SceneError::InvalidImage { reason } => write!(f, "invalid image: {reason}"),
            SceneError::AlreadyGrayscale => write!(f, "image is already single-channel"),
            SceneError::InvalidTrajectory { reason } => write!(f, "invalid trajectory: {reason}"),
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn union(self, other: Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn center(self) -> Vector3<f64> {
        (self.min + self.max) / 2.0
    }

    pub fn extents(self) -> Vector3<f64> {
        self.max - self.min
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Shape {
    /// Capped cylinder with its axis along world z.
    Cylinder,
    /// Axis-aligned box.
    Box,
}

/// One scene member.
///
/// `size` holds full extents: for a box the edge lengths, for a
/// cylinder `x = y =` diameter and `z =` height.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Primitive {
    pub shape: Shape,
    pub center: Vector3<f64>,
    pub size: Vector3<f64>,
    pub color: [f64; 3],
    /// Seed of this member's noise texture; distinct seeds keep
    /// identical members visually distinguishable.
    pub texture_seed: u64,
}

impl Primitive {
    pub fn aabb(&self) -> Aabb {
        Aabb {
            min: self.center - self.size / 2.0,
            max: self.center + self.size / 2.0,
        }
    }

    fn validate(&self, index: usize) -> Result<(), SceneError> {
        let finite = self.center.iter().chain(self.size.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(SceneError::InvalidPrimitive { index, reason: "non-finite geometry" });
        }
        if self.size.iter().any(|&v| v <= 0.0) {
            return Err(SceneError::InvalidPrimitive { index, reason: "size must be positive" });
        }
        if self.shape == Shape::Cylinder && (self.size.x - self.size.y).abs() > 1e-12 {
            return Err(SceneError::InvalidPrimitive {
                index,
                reason: "cylinder size.x and size.y must both equal the diameter",
            });
        }
        if self.color.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(SceneError::InvalidPrimitive { index, reason: "color outside [0, 1]" });
        }
        Ok(())
    }
}

/// A full scene: members, background water color, texture parameters.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneSpec {
    pub primitives: Vec<Primitive>,
    /// Color returned by rays that escape the structure.
    pub background: [f64; 3],
    /// Peak-to-trough strength of the value-noise texture, in color
    /// units.
    pub texture_amplitude: f64,
    /// Edge length of one noise lattice cell, in meters.
    pub texture_cell: f64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        for (i, p) in self.primitives.iter().enumerate() {
            p.validate(i)?;
        }
        if self.background.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(SceneError::InvalidScene { reason: "background color outside [0, 1]" });
        }
        if !(0.0..=1.0).contains(&self.texture_amplitude) {
            return Err(SceneError::InvalidScene { reason: "texture amplitude outside [0, 1]" });
        }
        if !(self.texture_cell > 0.0) || !self.texture_cell.is_finite() {
            return Err(SceneError::InvalidScene { reason: "texture cell must be positive" });
        }
        Ok(())
    }

    /// Bounding box of the whole structure.
    pub fn structure_bounds(&self) -> Result<Aabb, SceneError> {
        let mut it = self.primitives.iter();
        let first = it.next().ok_or(SceneError::EmptyScene)?.aabb();
        Ok(it.fold(first, |acc, p| acc.union(p.aabb())))
    }
}

/// Ready-made scenes mirroring the two field structures the pipeline
/// is exercised on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScenePreset {
    /// Test-tank structure: six piles of three stacked barrels tied by
    /// a top frame, roughly 3.9 × 4.6 × 3.0 m, sitting just below the
    /// surface.
    BarrelFrame,
    /// A single 5 m pillar, 0.5 m across, in murkier water.
    Pillar,
}

pub fn preset(kind: ScenePreset) -> SceneSpec {
    match kind {
        ScenePreset::BarrelFrame => barrel_frame(),
        ScenePreset::Pillar => pillar(),
    }
}

fn barrel_frame() -> SceneSpec {
    let mut primitives = Vec::new();
    let barrel = Vector3::new(0.6, 0.6, 1.0);
    let yellow = [0.85, 0.75, 0.15];
    for (xi, &x) in [-1.65, 1.65].iter().enumerate() {
        for (yi, &y) in [-2.0, 0.0, 2.0].iter().enumerate() {
            for level in 0..3u64 {
                primitives.push(Primitive {
                    shape: Shape::Cylinder,
                    center: Vector3::new(x, y, -2.5 + level as f64),
                    size: barrel,
                    color: yellow,
                    texture_seed: 1 + (xi as u64) * 9 + (yi as u64) * 3 + level,
                });
            }
        }
    }
    let gray = [0.35, 0.40, 0.42];
    // Top frame: two rails along y, three cross beams along x.
    for (i, &x) in [-1.65, 1.65].iter().enumerate() {
        primitives.push(Primitive {
            shape: Shape::Box,
            center: Vector3::new(x, 0.0, -0.075),
            size: Vector3::new(0.15, 4.0, 0.15),
            color: gray,
            texture_seed: 100 + i as u64,
        });
    }
    for (i, &y) in [-2.0, 0.0, 2.0].iter().enumerate() {
        primitives.push(Primitive {
            shape: Shape::Box,
            center: Vector3::new(0.0, y, -0.075),
            size: Vector3::new(3.3, 0.15, 0.15),
            color: gray,
            texture_seed: 110 + i as u64,
        });
    }
    SceneSpec {
        primitives,
        background: [0.05, 0.15, 0.25],
        texture_amplitude: 0.4,
        texture_cell: 0.25,
    }
}

fn pillar() -> SceneSpec {
    SceneSpec {
        primitives: vec![Primitive {
            shape: Shape::Cylinder,
            center: Vector3::new(0.0, 0.0, -2.5),
            size: Vector3::new(0.5, 0.5, 5.0),
            color: [0.26, 0.23, 0.20],
            texture_seed: 7,
        }],
        background: [0.08, 0.18, 0.16],
        texture_amplitude: 0.5,
        texture_cell: 0.2,
    }
}

/// Pinhole camera: `+z` forward, `+x` right, `+y` down.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view in radians.
    pub hfov: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::InvalidCamera { reason: "image dimensions must be nonzero" });
        }
        if !(self.hfov > 0.0 && self.hfov < core::f64::consts::PI) {
            return Err(SceneError::InvalidCamera { reason: "hfov must lie in (0, π)" });
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.hfov / 2.0).tan()
    }
}

/// Water-column degradation applied on top of the clean render.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct WaterColumn {
    /// Attenuation coefficient in 1/m; hit colors decay toward the
    /// background as `e^(−τ·range)`.
    pub turbidity: f64,
    /// Constant brightness offset added to every pixel.
    pub brightness_bias: f64,
    /// Std of the per-image brightness jitter.
    pub brightness_jitter_std: f64,
    /// Std of per-pixel, per-channel Gaussian sensor noise.
    pub pixel_noise_std: f64,
}

impl Default for WaterColumn {
    /// Clear, noise-free water.
    fn default() -> Self {
        WaterColumn {
            turbidity: 0.0,
            brightness_bias: 0.0,
            brightness_jitter_std: 0.0,
            pixel_noise_std: 0.0,
        }
    }
}

impl WaterColumn {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.turbidity >= 0.0) || !self.turbidity.is_finite() {
            return Err(SceneError::InvalidWater { reason: "turbidity must be nonnegative" });
        }
        if !self.brightness_bias.is_finite() {
            return Err(SceneError::InvalidWater { reason: "brightness bias must be finite" });
        }
        if !(self.brightness_jitter_std >= 0.0) || !self.brightness_jitter_std.is_finite() {
            return Err(SceneError::InvalidWater { reason: "brightness jitter std must be nonnegative" });
        }
        if !(self.pixel_noise_std >= 0.0) || !self.pixel_noise_std.is_finite() {
            return Err(SceneError::InvalidWater { reason: "pixel noise std must be nonnegative" });
        }
        Ok(())
    }
}

/// Float image, row-major, channel-interleaved, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Image {
    width: u32,
    height: u32,
    channels: u32,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u32, data: Vec<f64>) -> Result<Self, SceneError> {
        if width == 0 || height == 0 {
            return Err(SceneError::InvalidImage { reason: "dimensions must be nonzero" });
        }
        if channels != 1 && channels != 3 {
            return Err(SceneError::InvalidImage { reason: "channel count must be 1 or 3" });
        }
        if data.len() != (width * height * channels) as usize {
            return Err(SceneError::InvalidImage { reason: "buffer length does not match dimensions" });
        }
        Ok(Image { width, height, channels, data })
    }

    pub fn zeros(width: u32, height: u32, channels: u32) -> Result<Self, SceneError> {
        let len = (width as usize) * (height as usize) * (channels as usize);
        Image::new(width, height, channels, vec![0.0; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u32) -> f64 {
        self.data[((y * self.width + x) * self.channels + c) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u32, v: f64) {
        self.data[((y * self.width + x) * self.channels + c) as usize] = v;
    }

    /// Rec. 601 luminance reduction to a single channel.
    pub fn to_grayscale(&self) -> Result<Image, SceneError> {
        if self.channels == 1 {
            return Err(SceneError::AlreadyGrayscale);
        }
        let mut data = Vec::with_capacity((self.width * self.height) as usize);
        for px in self.data.chunks_exact(3) {
            data.push(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]);
        }
        Image::new(self.width, self.height, 1, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barrel_frame_bounds_match_field_structure() {
        let scene = preset(ScenePreset::BarrelFrame);
        scene.validate().unwrap();
        let b = scene.structure_bounds().unwrap();
        let e = b.extents();
        assert!((e.x - 3.9).abs() < 1e-12);
        assert!((e.y - 4.6).abs() < 1e-12);
        assert!((e.z - 3.0).abs() < 1e-12);
        assert!(b.max.z.abs() < 1e-12);
        assert_eq!(scene.primitives.iter().filter(|p| p.shape == Shape::Cylinder).count(), 18);
    }

    #[test]
    fn pillar_bounds() {
        let scene = preset(ScenePreset::Pillar);
        scene.validate().unwrap();
        let e = scene.structure_bounds().unwrap().extents();
        assert!((e.x - 0.5).abs() < 1e-12);
        assert!((e.z - 5.0).abs() < 1e-12);
    }

    #[test]
    fn texture_seeds_are_unique() {
        let scene = preset(ScenePreset::BarrelFrame);
        let mut seeds: Vec<u64> = scene.primitives.iter().map(|p| p.texture_seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), scene.primitives.len());
    }

    #[test]
    fn primitive_validation_catches_bad_cylinders() {
        let mut scene = preset(ScenePreset::Pillar);
        scene.primitives[0].size.y = 0.7;
        assert!(matches!(
            scene.validate(),
            Err(SceneError::InvalidPrimitive { index: 0, .. })
        ));
    }

    #[test]
    fn camera_validation() {
        assert!(CameraIntrinsics { width: 64, height: 48, hfov: 1.5 }.validate().is_ok());
        assert!(CameraIntrinsics { width: 0, height: 48, hfov: 1.5 }.validate().is_err());
        assert!(CameraIntrinsics { width: 64, height: 48, hfov: 0.0 }.validate().is_err());
        let cam = CameraIntrinsics { width: 64, height: 64, hfov: core::f64::consts::FRAC_PI_2 };
        assert!((cam.focal() - 32.0).abs() < 1e-12);
    }

    #[test]
    fn grayscale_conversion() {
        let img = Image::new(1, 1, 3, vec![1.0, 0.5, 0.0]).unwrap();
        let g = img.to_grayscale().unwrap();
        assert_eq!(g.channels(), 1);
        assert!((g.get(0, 0, 0) - (0.299 + 0.587 * 0.5)).abs() < 1e-12);
        assert_eq!(g.to_grayscale(), Err(SceneError::AlreadyGrayscale));
    }

    #[test]
    fn empty_scene_has_no_bounds() {
        let scene = SceneSpec {
            primitives: Vec::new(),
            background: [0.0; 3],
            texture_amplitude: 0.0,
            texture_cell: 1.0,
        };
        assert_eq!(scene.structure_bounds(), Err(SceneError::EmptyScene));
    }
}
