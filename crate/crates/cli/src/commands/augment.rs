//! `augment`: synthesize novel viewpoints around the training bands
//! and render them into an extra dataset.

use aquapose_core::augment::{color_jitter, render_augmented, synthesize_poses};
use aquapose_core::data::{TimedSample, TrialDataset};
use aquapose_core::geom::Pose;
use aquapose_core::rng::derive_seed;
use aquapose_core::scene::preset;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::{commands, formats};

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    commands::ensure_out_dir(config)?;
    let scene = preset(config.scene.preset);
    let bounds = scene.structure_bounds()?;
    // Rendering mismatch between real and synthetic views is part of
    // the augmentation model.
    let mut water = config.water;
    water.brightness_bias += config.augment.brightness_bias;

    let mut parts = Vec::with_capacity(config.data.train_bands.len());
    for (i, &band) in config.data.train_bands.iter().enumerate() {
        let manifest = config.band_manifest(band);
        commands::require_file(&manifest, "run `aquapose simulate` first")?;
        let (trial, _) = formats::load_dataset(&manifest)?;
        let base: Vec<Pose> = trial
            .samples()
            .iter()
            .filter_map(|s| s.pose)
            .collect();
        let poses = synthesize_poses(&base, &config.augment.synthesis, &bounds)?;
        let rendered = render_augmented(
            &scene,
            &config.camera,
            &water,
            &poses,
            config.trajectory.rate_hz,
            derive_seed(config.seeds.augment, i as u64),
        )?;
        println!("band {band}: {} base poses -> {} synthetic frames", base.len(), rendered.len());
        parts.push(rendered);
    }

    let refs: Vec<&TrialDataset> = parts.iter().collect();
    let mut combined = TrialDataset::concat_restamped(&refs, config.trajectory.rate_hz)?;
    if let Some(jitter) = &config.augment.jitter {
        let samples: Vec<TimedSample> = combined
            .into_samples()
            .into_iter()
            .enumerate()
            .map(|(k, mut s)| {
                if let Some(image) = &s.image {
                    let seed = derive_seed(config.seeds.augment, 0x4A00 + k as u64);
                    s.image = Some(color_jitter(image, jitter, seed));
                }
                s
            })
            .collect();
        combined = TrialDataset::new(samples)?;
    }

    let manifest = formats::write_dataset(
        &config.augmented_dir(),
        &format!("{}_augmented", config.name),
        &combined,
        None,
    )?;
    println!("{} synthetic frames -> {}", combined.len(), manifest.display());
    Ok(())
}
