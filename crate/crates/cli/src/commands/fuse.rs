//! `fuse`: run the constant-velocity filter over the held-out band,
//! fusing per-frame visual estimates with synthesized compass and
//! altimeter readings.

use aquapose_core::data::SampleSource;
use aquapose_core::fusion::{
    estimator_measurement, run_filter, FilterState, MeasurementKind, TimedMeasurement,
};
use aquapose_core::geom::{Pose, Quaternion};
use aquapose_core::rng::derive_seed;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::formats::TrajectoryRow;
use crate::{commands, formats};

/// Heading of the view direction projected into the horizontal plane.
/// `None` when the camera looks straight up or down.
fn view_heading(q: Quaternion) -> Option<f64> {
    let f = q.rotate_vector(Vector3::z());
    if f.x * f.x + f.y * f.y <= 1e-6 {
        None
    } else {
        Some(f.y.atan2(f.x))
    }
}

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    commands::ensure_out_dir(config)?;
    let checkpoint = config.checkpoint_path();
    commands::require_file(&checkpoint, "run `aquapose train` first")?;
    let (params, norm) = formats::read_checkpoint(&checkpoint)?;

    let manifest = config.band_manifest(config.fuse.band);
    commands::require_file(&manifest, "run `aquapose simulate` first")?;
    let (trial, _) = formats::load_dataset(&manifest)?;
    let t0 = trial.start_time();
    let t_end = trial.end_time();

    let mut measurements: Vec<TimedMeasurement> = Vec::new();
    let mut estimator_rows: Vec<TrajectoryRow> = Vec::new();
    for (k, sample) in trial.samples().iter().enumerate() {
        let Some(image) = &sample.image else { continue };
        let m = estimator_measurement(
            &params,
            image,
            config.filter.mc_samples,
            derive_seed(config.seeds.fuse, k as u64),
            config.filter.noise_floor,
            &norm,
            sample.timestamp,
        )?;
        if let MeasurementKind::Pose7 { value, .. } = &m.kind {
            estimator_rows.push(TrajectoryRow {
                t: m.timestamp,
                pose: Pose::new(
                    Vector3::new(value[0], value[1], value[2]),
                    Quaternion::new(value[3], value[4], value[5], value[6]),
                ),
                source: SampleSource::Estimator,
                image_path: String::new(),
                ptrace: None,
            });
        }
        measurements.push(m);
    }
    if measurements.is_empty() {
        return Err(CliError::Data("band has no camera frames to fuse".into()));
    }

    let mut compass_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seeds.fuse, 0xC0));
    let mut j = 0u64;
    loop {
        let t = t0 + j as f64 / config.fuse.compass_rate_hz;
        if t > t_end {
            break;
        }
        let truth = trial.sync_interpolate(t)?;
        if let Some(heading) = view_heading(truth.orientation) {
            let z: f64 = StandardNormal.sample(&mut compass_rng);
            measurements.push(TimedMeasurement {
                timestamp: t,
                kind: MeasurementKind::Compass {
                    heading: heading + config.filter.compass_noise_std * z,
                },
            });
        }
        j += 1;
    }

    let mut alt_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seeds.fuse, 0xA1));
    let mut j = 0u64;
    loop {
        let t = t0 + j as f64 / config.fuse.altimeter_rate_hz;
        if t > t_end {
            break;
        }
        let truth = trial.sync_interpolate(t)?;
        let z: f64 = StandardNormal.sample(&mut alt_rng);
        measurements.push(TimedMeasurement {
            timestamp: t,
            kind: MeasurementKind::Altimeter {
                z: truth.position.z + config.filter.altimeter_noise_std * z,
            },
        });
        j += 1;
    }

    // Stable by timestamp: simultaneous readings keep camera, then
    // compass, then altimeter order.
    measurements.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

    let first_truth = trial
        .samples()
        .iter()
        .find_map(|s| s.pose)
        .ok_or_else(|| CliError::Data("band has no reference poses".into()))?;
    let initial = FilterState::from_pose(&first_truth, t0, &config.filter);
    let states = run_filter(&initial, &config.filter, &measurements)?;

    let fused_rows: Vec<TrajectoryRow> = states
        .iter()
        .map(|s| TrajectoryRow {
            t: s.time,
            pose: s.pose(),
            source: SampleSource::Fused,
            image_path: String::new(),
            ptrace: Some(s.cov.trace()),
        })
        .collect();

    formats::write_trajectory_csv(&config.estimator_path(), &estimator_rows, false)?;
    formats::write_trajectory_csv(&config.fused_path(), &fused_rows, true)?;
    println!(
        "fused {} measurements ({} visual) -> {}",
        measurements.len(),
        estimator_rows.len(),
        config.fused_path().display()
    );
    Ok(())
}
