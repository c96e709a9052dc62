//! `train`: fit the pose regressor on the configured split and save a
//! checkpoint. With `beta_grid` set and a β-loss, runs the grid
//! search and keeps the best trial's weights.

use std::time::Instant;

use aquapose_core::data::{PoseNormalization, TrialDataset};
use aquapose_core::loss::PoseLoss;
use aquapose_core::regressor::{grid_search_beta, train, EpochStats, NetParams, TrainSample};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::{commands, formats};

/// Grid-search record without machine-dependent timing, so the file
/// is identical across runs.
#[derive(Serialize)]
struct BetaTrialRecord {
    beta: f64,
    val_loss: f64,
    eval_loss: f64,
    epochs_run: usize,
}

#[derive(Serialize)]
struct BetaSearchRecord {
    best_index: usize,
    trials: Vec<BetaTrialRecord>,
}

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    commands::ensure_out_dir(config)?;
    let mut splits = commands::assemble_splits(config)?;
    if config.data.use_augmented {
        let manifest = config.augmented_dir().join("manifest.json");
        commands::require_file(&manifest, "run `aquapose augment` first")?;
        let (augmented, _) = formats::load_dataset(&manifest)?;
        splits.train.push(augmented);
    }

    let parts: Vec<&TrialDataset> = splits.train.iter().collect();
    let pool = TrialDataset::concat_restamped(&parts, config.trajectory.rate_hz)?;
    let norm = pool.fit_normalization()?;

    let train_set = normalized_samples(&pool, &norm)?;
    let val_set = normalized_samples(&splits.val, &norm)?;
    println!("training on {} samples, validating on {}", train_set.len(), val_set.len());

    let use_grid = !config.beta_grid.is_empty() && matches!(config.train.loss, PoseLoss::Beta { .. });
    let (params, history) = if use_grid {
        run_beta_search(config, &train_set, &val_set)?
    } else {
        let initial = NetParams::init(config.net.clone(), config.train.seed)?;
        let outcome = train(initial, &train_set, &val_set, &config.train)?;
        println!(
            "best epoch {} of {}, validation loss {:.6}",
            outcome.best_epoch,
            outcome.history.len(),
            outcome.best_val_loss
        );
        (outcome.params, outcome.history)
    };

    write_history(config, &history)?;
    formats::write_checkpoint(&config.checkpoint_path(), &params, norm)?;
    println!("checkpoint -> {}", config.checkpoint_path().display());
    Ok(())
}

fn run_beta_search(
    config: &ExperimentConfig,
    train_set: &[TrainSample<'_>],
    val_set: &[TrainSample<'_>],
) -> Result<(NetParams, Vec<EpochStats>), CliError> {
    let start = Instant::now();
    let mut clock = || start.elapsed().as_secs_f64();
    let search = grid_search_beta(
        &config.net,
        config.train.seed,
        train_set,
        val_set,
        &config.train,
        &config.beta_grid,
        config.eval.d,
        &mut clock,
    )?;
    let record = BetaSearchRecord {
        best_index: search.best_index,
        trials: search
            .trials
            .iter()
            .map(|t| BetaTrialRecord {
                beta: t.beta,
                val_loss: t.val_loss,
                eval_loss: t.eval_loss,
                epochs_run: t.epochs_run,
            })
            .collect(),
    };
    let path = config.out_dir.join("beta_search.json");
    formats::write_json(&path, &record)?;
    let best = &search.trials[search.best_index];
    println!(
        "beta search: best beta {} (validation loss {:.6}, composite {:.6}) -> {}",
        best.beta,
        best.val_loss,
        best.eval_loss,
        path.display()
    );
    // The search keeps only the winning weights; per-epoch curves stay
    // internal to each trial.
    Ok((search.params, Vec::new()))
}

fn normalized_samples<'a>(
    trial: &'a TrialDataset,
    norm: &PoseNormalization,
) -> Result<Vec<TrainSample<'a>>, CliError> {
    let labeled = commands::labeled_samples(trial)?;
    Ok(labeled
        .into_iter()
        .map(|(image, pose)| (image, norm.normalize_pose(&pose)))
        .collect())
}

fn write_history(config: &ExperimentConfig, history: &[EpochStats]) -> Result<(), CliError> {
    if history.is_empty() {
        return Ok(());
    }
    let path = config.out_dir.join("history.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "train_loss", "val_loss"])
        .map_err(|e| CliError::Data(e.to_string()))?;
    for s in history {
        w.write_record([
            s.epoch.to_string(),
            formats::fmt_f64(s.train_loss),
            formats::fmt_f64(s.val_loss),
        ])
        .map_err(|e| CliError::Data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, &e))?;
    Ok(())
}
