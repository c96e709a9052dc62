pub mod augment;
pub mod eval;
pub mod fuse;
pub mod report;
pub mod simulate;
pub mod train;

use std::path::Path;

use aquapose_core::data::{TimedSample, TrialDataset};
use aquapose_core::geom::Pose;
use aquapose_core::scene::Image;

use crate::config::{DataMode, ExperimentConfig};
use crate::error::CliError;
use crate::formats;

/// Train/val/test sets assembled per `[data]`. Both `train` and
/// `eval` derive splits from the same seeds, so the partition is
/// identical across subcommands.
pub struct Splits {
    pub train: Vec<TrialDataset>,
    pub val: TrialDataset,
    pub test: TrialDataset,
}

pub fn assemble_splits(config: &ExperimentConfig) -> Result<Splits, CliError> {
    match config.data.mode {
        DataMode::Split => {
            let band = config.data.train_bands[0];
            let (trial, _) = formats::load_dataset(&config.band_manifest(band))?;
            let (train, val, test) = trial.split(config.data.fractions, config.seeds.split)?;
            Ok(Splits { train: vec![train], val, test })
        }
        DataMode::CrossBand => {
            let mut train = Vec::with_capacity(config.data.train_bands.len());
            for &band in &config.data.train_bands {
                let (trial, _) = formats::load_dataset(&config.band_manifest(band))?;
                train.push(trial);
            }
            let (held, _) = formats::load_dataset(&config.band_manifest(config.data.eval_band))?;
            // Half the held-out band validates, half tests.
            let (val, t1, t2) = held.split([0.5, 0.25, 0.25], config.seeds.split)?;
            let test = merge_by_time(&[t1, t2])?;
            Ok(Splits { train, val, test })
        }
    }
}

/// Interleaves time-ordered parts back into one timeline.
fn merge_by_time(parts: &[TrialDataset]) -> Result<TrialDataset, CliError> {
    let mut samples: Vec<TimedSample> =
        parts.iter().flat_map(|p| p.samples().iter().cloned()).collect();
    samples.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(TrialDataset::new(samples)?)
}

/// Flattens a dataset into `(image, pose)` pairs, rejecting samples
/// that lack either half.
pub fn labeled_samples(trial: &TrialDataset) -> Result<Vec<(&Image, Pose)>, CliError> {
    trial
        .samples()
        .iter()
        .map(|s| match (&s.image, s.pose) {
            (Some(image), Some(pose)) => Ok((image, pose)),
            _ => Err(CliError::Data(format!(
                "sample at t={} has no image or no pose",
                s.timestamp
            ))),
        })
        .collect()
}

pub fn ensure_out_dir(config: &ExperimentConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| CliError::io(&config.out_dir, &e))
}

pub fn require_file(path: &Path, hint: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} not found ({hint})", path.display())))
    }
}
