//! `simulate`: ray-cast one survey trial per depth band and write
//! each as an image directory plus trajectory CSV.

use aquapose_core::rng::derive_seed;
use aquapose_core::scene::{generate_trial, lawnmower_trajectory, preset, LawnmowerConfig};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::{commands, formats};

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    commands::ensure_out_dir(config)?;
    let scene = preset(config.scene.preset);
    for (band, &depth) in config.trajectory.depths.iter().enumerate() {
        let sweep = LawnmowerConfig {
            depth,
            standoff: config.trajectory.standoff,
            line_spacing: config.trajectory.line_spacing,
            sample_spacing: config.trajectory.sample_spacing,
            mode: config.trajectory.mode,
        };
        let poses = lawnmower_trajectory(&scene, &sweep)?;
        let trial = generate_trial(
            &scene,
            &config.camera,
            &config.water,
            &poses,
            config.trajectory.rate_hz,
            derive_seed(config.seeds.simulate, band as u64),
        )?;
        let count = trial.len();
        let manifest = formats::write_dataset(
            &config.band_dir(band),
            &format!("{}_band_{band}", config.name),
            &trial,
            None,
        )?;
        println!(
            "band {band} (depth {depth} m): {count} frames -> {}",
            manifest.display()
        );
    }
    Ok(())
}
