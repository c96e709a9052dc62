//! `eval`: score the checkpoint on the held-out split and/or the
//! fused trajectory against ground truth, writing JSON reports and
//! CDF tables.

use std::collections::HashMap;
use std::path::Path;

use aquapose_core::data::TrialDataset;
use aquapose_core::eval::{evaluate, pose_errors, CdfPoint};
use aquapose_core::geom::{Pose, Quaternion};
use aquapose_core::regressor::DropoutMode;

use crate::config::{EvalTarget, ExperimentConfig};
use crate::error::CliError;
use crate::{commands, formats};

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    commands::ensure_out_dir(config)?;
    for target in &config.eval.targets {
        match target {
            EvalTarget::Checkpoint => eval_checkpoint(config)?,
            EvalTarget::Fused => eval_fused(config)?,
        }
    }
    Ok(())
}

fn eval_checkpoint(config: &ExperimentConfig) -> Result<(), CliError> {
    let checkpoint = config.checkpoint_path();
    commands::require_file(&checkpoint, "run `aquapose train` first")?;
    let (params, norm) = formats::read_checkpoint(&checkpoint)?;
    let splits = commands::assemble_splits(config)?;
    let labeled = commands::labeled_samples(&splits.test)?;

    let mut estimates = Vec::with_capacity(labeled.len());
    let mut truth = Vec::with_capacity(labeled.len());
    for (sample, (image, pose)) in splits.test.samples().iter().zip(&labeled) {
        let out = params.forward(image, DropoutMode::Off)?;
        let q = Quaternion::new(out[3], out[4], out[5], out[6]).normalize().map_err(
            |_| CliError::Numeric("predicted quaternion collapsed to zero".into()),
        )?;
        let position = norm.denormalize_position(nalgebra::Vector3::new(out[0], out[1], out[2]));
        estimates.push((sample.timestamp, Pose::new(position, q)));
        truth.push((sample.timestamp, *pose));
    }
    write_report(config, "checkpoint", &estimates, &truth)
}

fn eval_fused(config: &ExperimentConfig) -> Result<(), CliError> {
    let manifest = config.band_manifest(config.fuse.band);
    commands::require_file(&manifest, "run `aquapose simulate` first")?;
    let (trial, _) = formats::load_dataset(&manifest)?;
    for (label, path, last_wins) in [
        ("fused", config.fused_path(), true),
        ("estimator", config.estimator_path(), false),
    ] {
        commands::require_file(&path, "run `aquapose fuse` first")?;
        let (estimates, truth) = align_to_truth(&path, &trial, last_wins)?;
        write_report(config, label, &estimates, &truth)?;
    }
    Ok(())
}

/// Pairs trajectory rows with truth samples that carry the same
/// timestamp. With `last_wins`, the latest row at a given time is
/// kept — the state after every sensor at that instant was fused.
#[allow(clippy::type_complexity)]
fn align_to_truth(
    path: &Path,
    trial: &TrialDataset,
    last_wins: bool,
) -> Result<(Vec<(f64, Pose)>, Vec<(f64, Pose)>), CliError> {
    let rows = formats::read_trajectory_csv(path)?;
    let mut by_time: HashMap<u64, Pose> = HashMap::new();
    for row in rows {
        let key = row.t.to_bits();
        if last_wins || !by_time.contains_key(&key) {
            by_time.insert(key, row.pose);
        }
    }
    let mut estimates = Vec::new();
    let mut truth = Vec::new();
    for sample in trial.samples() {
        let Some(pose) = sample.pose else { continue };
        if let Some(est) = by_time.get(&sample.timestamp.to_bits()) {
            estimates.push((sample.timestamp, *est));
            truth.push((sample.timestamp, pose));
        }
    }
    if estimates.is_empty() {
        return Err(CliError::Data(format!(
            "{} shares no timestamps with the reference band",
            path.display()
        )));
    }
    Ok((estimates, truth))
}

fn write_report(
    config: &ExperimentConfig,
    label: &str,
    estimates: &[(f64, Pose)],
    truth: &[(f64, Pose)],
) -> Result<(), CliError> {
    let records = pose_errors(estimates, truth)?;
    let report = evaluate(&records, config.eval.d, config.eval.angle_form, None)?;
    let json_path = config.out_dir.join(format!("report_{label}.json"));
    formats::write_json(&json_path, &report)?;
    write_cdf(&config.out_dir.join(format!("{label}_position_cdf.csv")), &report.position_cdf)?;
    write_cdf(&config.out_dir.join(format!("{label}_angular_cdf.csv")), &report.angular_cdf)?;
    println!(
        "{label}: {} poses, median position {:.4} m, median angle {:.3} deg, median composite {:.4} m -> {}",
        report.count,
        report.median_position_error,
        report.median_angular_error.to_degrees(),
        report.median_composite_loss,
        json_path.display()
    );
    Ok(())
}

fn write_cdf(path: &Path, cdf: &[CdfPoint]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["value", "fraction"]).map_err(|e| CliError::Data(e.to_string()))?;
    for p in cdf {
        w.write_record([formats::fmt_f64(p.value), formats::fmt_f64(p.fraction)])
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, &e))?;
    Ok(())
}
