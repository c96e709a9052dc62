//! Timestamped trial datasets and their plumbing: resampling onto a
//! uniform grid, pose interpolation, position normalization, and
//! seeded train/val/test splits.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geom::{slerp, Pose};
use crate::scene::Image;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DataError {
    EmptyDataset,
    NonMonotonicTimestamps { index: usize },
    NonFiniteTimestamp { index: usize },
    OutOfRange { t: f64, lo: f64, hi: f64 },
    DegenerateAxis { axis: usize },
    NoPoseSamples,
    InvalidFractions,
    InvalidRate,
    InvalidNormalization,
    UnknownSource,
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::EmptyDataset => write!(f, "dataset contains no samples"),
            DataError::NonMonotonicTimestamps { index } => {
                write!(f, "timestamp at index {index} does not increase")
            }
            DataError::NonFiniteTimestamp { index } => {
                write!(f, "timestamp at index {index} is not finite")
            }
            DataError::OutOfRange { t, lo, hi } => {
                write!(f, "time {t} outside the covered range [{lo}, {hi}]")
            }
            DataError::DegenerateAxis { axis } => {
                write!(f, "position axis {axis} has zero extent; cannot normalize")
            }
            DataError::NoPoseSamples => write!(f, "dataset has no pose-bearing samples"),
            DataError::InvalidFractions => {
                write!(f, "split fractions must be positive, sum to one, and leave no part empty")
            }
            DataError::InvalidRate => write!(f, "sample rate must be positive"),
            DataError::InvalidNormalization => write!(f, "normalization must have max > min per axis"),
            DataError::UnknownSource => write!(f, "unknown sample source label"),
        }
    }
}

/// Where a sample came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SampleSource {
    Camera,
    Usbl,
    Altimeter,
    Compass,
    Estimator,
    Augmented,
    Fused,
}

impl SampleSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleSource::Camera => "camera",
            SampleSource::Usbl => "usbl",
            SampleSource::Altimeter => "altimeter",
            SampleSource::Compass => "compass",
            SampleSource::Estimator => "estimator",
            SampleSource::Augmented => "augmented",
            SampleSource::Fused => "fused",
        }
    }
}

impl core::str::FromStr for SampleSource {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, DataError> {
        Ok(match s {
            "camera" => SampleSource::Camera,
            "usbl" => SampleSource::Usbl,
            "altimeter" => SampleSource::Altimeter,
            "compass" => SampleSource::Compass,
            "estimator" => SampleSource::Estimator,
            "augmented" => SampleSource::Augmented,
            "fused" => SampleSource::Fused,
            _ => return Err(DataError::UnknownSource),
        })
    }
}

impl fmt::Display for SampleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One record of a trial: a timestamp plus whatever the carrier
/// captured there — a camera frame, a reference pose, or both.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedSample {
    pub timestamp: f64,
    pub image: Option<Image>,
    pub pose: Option<Pose>,
    pub source: SampleSource,
}

/// Per-axis affine map between world positions and the `[-1, 1]` cube
/// the regressor is trained in. Orientations pass through untouched.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoseNormalization {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl PoseNormalization {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Result<Self, DataError> {
        for i in 0..3 {
            if !(max[i] > min[i]) || !min[i].is_finite() || !max[i].is_finite() {
                return Err(DataError::InvalidNormalization);
            }
        }
        Ok(PoseNormalization { min, max })
    }

    /// Half of the per-axis extent, the meters-per-unit scale of the
    /// normalized space.
    pub fn half_extent(&self) -> Vector3<f64> {
        (self.max - self.min) / 2.0
    }

    pub fn normalize_position(&self, p: Vector3<f64>) -> Vector3<f64> {
        let he = self.half_extent();
        let mid = (self.min + self.max) / 2.0;
        Vector3::new((p.x - mid.x) / he.x, (p.y - mid.y) / he.y, (p.z - mid.z) / he.z)
    }

    pub fn denormalize_position(&self, p: Vector3<f64>) -> Vector3<f64> {
        let he = self.half_extent();
        let mid = (self.min + self.max) / 2.0;
        Vector3::new(p.x * he.x + mid.x, p.y * he.y + mid.y, p.z * he.z + mid.z)
    }

    pub fn normalize_pose(&self, pose: &Pose) -> Pose {
        Pose::new(self.normalize_position(pose.position), pose.orientation)
    }

    pub fn denormalize_pose(&self, pose: &Pose) -> Pose {
        Pose::new(self.denormalize_position(pose.position), pose.orientation)
    }
}

/// A time-ordered trial. Timestamps are strictly increasing and finite.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialDataset {
    samples: Vec<TimedSample>,
}

impl TrialDataset {
    pub fn new(samples: Vec<TimedSample>) -> Result<Self, DataError> {
        if samples.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.timestamp.is_finite() {
                return Err(DataError::NonFiniteTimestamp { index: i });
            }
            if i > 0 && s.timestamp <= samples[i - 1].timestamp {
                return Err(DataError::NonMonotonicTimestamps { index: i });
            }
        }
        Ok(TrialDataset { samples })
    }

    pub fn samples(&self) -> &[TimedSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<TimedSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].timestamp
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].timestamp
    }

    /// Resamples onto the uniform grid `t₀ + k/rate` spanning the
    /// trial. A grid point adopts the nearest sample when one lies
    /// within half a period (restamped to the grid); otherwise it gets
    /// an interpolated pose and no image. Sample payloads are never
    /// duplicated onto two grid points' worth of new information —
    /// each grid point is an independent nearest/interpolate decision.
    pub fn resample(&self, rate_hz: f64) -> Result<TrialDataset, DataError> {
        if !(rate_hz > 0.0) || !rate_hz.is_finite() {
            return Err(DataError::InvalidRate);
        }
        let period = 1.0 / rate_hz;
        let t0 = self.start_time();
        let span = self.end_time() - t0;
        let steps = (span * rate_hz + 1e-9).floor() as usize;
        let mut out = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let t = t0 + k as f64 * period;
            let idx = self.nearest_index(t);
            let s = &self.samples[idx];
            if (s.timestamp - t).abs() <= period / 2.0 + 1e-12 {
                let mut s = s.clone();
                s.timestamp = t;
                out.push(s);
            } else {
                let pose = self.sync_interpolate(t)?;
                out.push(TimedSample { timestamp: t, image: None, pose: Some(pose), source: s.source });
            }
        }
        TrialDataset::new(out)
    }

    fn nearest_index(&self, t: f64) -> usize {
        let right = self.samples.partition_point(|s| s.timestamp < t);
        if right == 0 {
            return 0;
        }
        if right == self.samples.len() {
            return right - 1;
        }
        let (a, b) = (&self.samples[right - 1], &self.samples[right]);
        // Ties go to the earlier sample.
        if (t - a.timestamp) <= (b.timestamp - t) {
            right - 1
        } else {
            right
        }
    }

    /// Ground-truth pose at an arbitrary time inside the covered span:
    /// linear in position, spherical-linear in orientation between the
    /// bracketing pose-bearing samples.
    pub fn sync_interpolate(&self, t: f64) -> Result<Pose, DataError> {
        let mut lo: Option<(f64, Pose)> = None;
        let mut hi: Option<(f64, Pose)> = None;
        let mut first = f64::INFINITY;
        let mut last = f64::NEG_INFINITY;
        for s in &self.samples {
            let Some(pose) = s.pose else { continue };
            first = first.min(s.timestamp);
            last = last.max(s.timestamp);
            if s.timestamp <= t {
                lo = Some((s.timestamp, pose));
            }
            if s.timestamp >= t && hi.is_none() {
                hi = Some((s.timestamp, pose));
            }
        }
        if !first.is_finite() {
            return Err(DataError::NoPoseSamples);
        }
        let (Some((ta, pa)), Some((tb, pb))) = (lo, hi) else {
            return Err(DataError::OutOfRange { t, lo: first, hi: last });
        };
        if tb == ta {
            return Ok(pa);
        }
        let u = (t - ta) / (tb - ta);
        Ok(Pose::new(
            pa.position + (pb.position - pa.position) * u,
            slerp(pa.orientation, pb.orientation, u),
        ))
    }

    /// Axis-aligned bounding box of the ground-truth positions,
    /// packaged as a normalization. Every axis must have positive
    /// extent — a trial that never varies an axis cannot anchor it.
    pub fn fit_normalization(&self) -> Result<PoseNormalization, DataError> {
        let mut min = Vector3::repeat(f64::INFINITY);
        let mut max = Vector3::repeat(f64::NEG_INFINITY);
        let mut any = false;
        for s in &self.samples {
            if let Some(pose) = s.pose {
                any = true;
                min = min.inf(&pose.position);
                max = max.sup(&pose.position);
            }
        }
        if !any {
            return Err(DataError::NoPoseSamples);
        }
        for axis in 0..3 {
            if !(max[axis] - min[axis] > 1e-12) {
                return Err(DataError::DegenerateAxis { axis });
            }
        }
        PoseNormalization::new(min, max)
    }

    /// Random train/val/test split. Fractions must be positive and sum
    /// to one; boundaries are rounded, and no part may come out empty.
    /// Each part keeps its samples in time order.
    pub fn split(
        &self,
        fractions: [f64; 3],
        seed: u64,
    ) -> Result<(TrialDataset, TrialDataset, TrialDataset), DataError> {
        if fractions.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(DataError::InvalidFractions);
        }
        if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidFractions);
        }
        let n = self.samples.len();
        let c1 = (n as f64 * fractions[0]).round() as usize;
        let c2 = (n as f64 * (fractions[0] + fractions[1])).round() as usize;
        if c1 == 0 || c2 <= c1 || c2 >= n {
            return Err(DataError::InvalidFractions);
        }
        let mut indices: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        indices.shuffle(&mut rng);
        let collect = |part: &[usize]| -> Result<TrialDataset, DataError> {
            let mut sorted: Vec<usize> = part.to_vec();
            sorted.sort_unstable();
            TrialDataset::new(sorted.iter().map(|&i| self.samples[i].clone()).collect())
        };
        Ok((
            collect(&indices[..c1])?,
            collect(&indices[c1..c2])?,
            collect(&indices[c2..])?,
        ))
    }

    /// Concatenates several trials into one time-ordered dataset. The
    /// first non-empty part keeps its timestamps; every following
    /// sample is restamped to continue the timeline at `1/rate_hz`
    /// intervals, preserving order within and across parts.
    pub fn concat_restamped(parts: &[&TrialDataset], rate_hz: f64) -> Result<TrialDataset, DataError> {
        if !(rate_hz > 0.0) || !rate_hz.is_finite() {
            return Err(DataError::InvalidRate);
        }
        let Some((first, rest)) = parts.split_first() else {
            return Err(DataError::EmptyDataset);
        };
        let mut out: Vec<TimedSample> = first.samples().to_vec();
        for part in rest {
            for s in part.samples() {
                let mut s = s.clone();
                s.timestamp = out[out.len() - 1].timestamp + 1.0 / rate_hz;
                out.push(s);
            }
        }
        TrialDataset::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Quaternion;
    use approx::assert_abs_diff_eq;

    fn pose_at(x: f64) -> Pose {
        Pose::new(
            Vector3::new(x, 2.0 * x, -x),
            Quaternion::from_axis_angle(Vector3::z(), 0.1 * x),
        )
    }

    fn grid(n: usize, dt: f64) -> TrialDataset {
        let samples = (0..n)
            .map(|k| TimedSample {
                timestamp: k as f64 * dt,
                image: None,
                pose: Some(pose_at(k as f64)),
                source: SampleSource::Camera,
            })
            .collect();
        TrialDataset::new(samples).unwrap()
    }

    #[test]
    fn construction_rejects_disorder() {
        let mut s = grid(4, 0.1).into_samples();
        s[2].timestamp = s[1].timestamp;
        assert_eq!(
            TrialDataset::new(s),
            Err(DataError::NonMonotonicTimestamps { index: 2 })
        );
        assert_eq!(TrialDataset::new(Vec::new()), Err(DataError::EmptyDataset));
    }

    #[test]
    fn resample_downsamples_ten_to_five_hz() {
        let ds = grid(11, 0.1); // 1 s of 10 Hz data
        let out = ds.resample(5.0).unwrap();
        assert_eq!(out.len(), 6);
        for (k, s) in out.samples().iter().enumerate() {
            assert_abs_diff_eq!(s.timestamp, k as f64 * 0.2, epsilon = 1e-12);
            // Every second original sample is adopted exactly.
            assert_eq!(s.pose.unwrap(), pose_at(2.0 * k as f64));
        }
    }

    #[test]
    fn resample_keeps_uniform_data_unchanged() {
        let ds = grid(7, 0.2);
        let out = ds.resample(5.0).unwrap();
        assert_eq!(out.len(), 7);
        assert_eq!(out.samples(), ds.samples());
    }

    #[test]
    fn resample_interpolates_across_gaps() {
        let mut samples = grid(6, 0.2).into_samples();
        samples.remove(2); // drop t=0.4
        let ds = TrialDataset::new(samples).unwrap();
        let out = ds.resample(5.0).unwrap();
        assert_eq!(out.len(), 6);
        let filled = &out.samples()[2];
        assert!(filled.image.is_none());
        let p = filled.pose.unwrap();
        assert_abs_diff_eq!(p.position.x, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn sync_interpolate_blends_position_and_orientation() {
        let ds = grid(3, 1.0);
        let p = ds.sync_interpolate(0.5).unwrap();
        assert_abs_diff_eq!(p.position.x, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.position.y, 1.0, epsilon = 1e-12);
        let expect = Quaternion::from_axis_angle(Vector3::z(), 0.05);
        assert_abs_diff_eq!(
            crate::geom::angular_distance(p.orientation, expect).unwrap(),
            0.0,
            epsilon = 1e-9
        );
        // Exact timestamps return stored poses.
        assert_eq!(ds.sync_interpolate(1.0).unwrap(), pose_at(1.0));
        assert!(matches!(
            ds.sync_interpolate(2.5),
            Err(DataError::OutOfRange { .. })
        ));
    }

    #[test]
    fn normalization_fits_and_round_trips() {
        let ds = grid(5, 0.5);
        let norm = ds.fit_normalization().unwrap();
        assert_abs_diff_eq!(norm.min.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(norm.max.x, 4.0, epsilon = 1e-12);
        for s in ds.samples() {
            let p = s.pose.unwrap();
            let n = norm.normalize_pose(&p);
            assert!(n.position.iter().all(|v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(v)));
            let back = norm.denormalize_pose(&n);
            assert_abs_diff_eq!((back.position - p.position).norm(), 0.0, epsilon = 1e-12);
            assert_eq!(back.orientation, p.orientation);
        }
    }

    #[test]
    fn constant_axis_cannot_normalize() {
        let samples: Vec<_> = (0..4)
            .map(|k| TimedSample {
                timestamp: k as f64,
                image: None,
                pose: Some(Pose::new(Vector3::new(k as f64, 1.0, -2.0), Quaternion::IDENTITY)),
                source: SampleSource::Camera,
            })
            .collect();
        let ds = TrialDataset::new(samples).unwrap();
        assert_eq!(ds.fit_normalization(), Err(DataError::DegenerateAxis { axis: 1 }));
    }

    #[test]
    fn split_sizes_and_partition() {
        let ds = grid(10, 0.2);
        let (train, val, test) = ds.split([0.6, 0.2, 0.2], 99).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (6, 2, 2));
        let mut all: Vec<u64> = train
            .samples()
            .iter()
            .chain(val.samples())
            .chain(test.samples())
            .map(|s| s.timestamp.to_bits())
            .collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 10);
        for part in [&train, &val, &test] {
            for w in part.samples().windows(2) {
                assert!(w[0].timestamp < w[1].timestamp);
            }
        }
        // Deterministic under the seed, sensitive to it.
        let (t2, _, _) = ds.split([0.6, 0.2, 0.2], 99).unwrap();
        assert_eq!(train, t2);
        let (t3, _, _) = ds.split([0.6, 0.2, 0.2], 100).unwrap();
        assert_ne!(train, t3);
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let ds = grid(10, 0.2);
        assert_eq!(ds.split([0.5, 0.5, 0.2], 1), Err(DataError::InvalidFractions));
        assert_eq!(ds.split([0.6, 0.0, 0.4], 1), Err(DataError::InvalidFractions));
        // Too small to give everyone a sample.
        let tiny = grid(2, 0.2);
        assert_eq!(tiny.split([0.6, 0.2, 0.2], 1), Err(DataError::InvalidFractions));
    }

    #[test]
    fn concat_restamps_later_parts() {
        let a = grid(3, 0.2);
        let b = grid(4, 0.2);
        let merged = TrialDataset::concat_restamped(&[&a, &b], 5.0).unwrap();
        assert_eq!(merged.len(), 7);
        for w in merged.samples().windows(2) {
            assert!(w[0].timestamp < w[1].timestamp);
        }
        assert_abs_diff_eq!(merged.samples()[2].timestamp, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(merged.samples()[3].timestamp, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(merged.end_time(), 1.2, epsilon = 1e-12);
    }

    #[test]
    fn source_labels_round_trip() {
        for s in [
            SampleSource::Camera,
            SampleSource::Usbl,
            SampleSource::Altimeter,
            SampleSource::Compass,
            SampleSource::Estimator,
            SampleSource::Augmented,
            SampleSource::Fused,
        ] {
            assert_eq!(s.as_str().parse::<SampleSource>().unwrap(), s);
        }
        assert_eq!("sonar".parse::<SampleSource>(), Err(DataError::UnknownSource));
    }
}
