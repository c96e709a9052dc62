//! `report`: collect every metric file in the output directory into
//! one markdown summary.

use std::fmt::Write as _;
use std::fs;

use aquapose_core::eval::ExperimentReport;
use aquapose_core::loss::AngleForm;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::formats;

#[derive(serde::Deserialize)]
struct BetaTrialRecord {
    beta: f64,
    val_loss: f64,
    eval_loss: f64,
    epochs_run: usize,
}

#[derive(serde::Deserialize)]
struct BetaSearchRecord {
    best_index: usize,
    trials: Vec<BetaTrialRecord>,
}

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    let mut md = String::new();
    let _ = writeln!(md, "# {}\n", config.name);
    let _ = writeln!(md, "- scene preset: `{:?}`", config.scene.preset);
    let _ = writeln!(
        md,
        "- depth bands: {}",
        config
            .trajectory
            .depths
            .iter()
            .map(|d| format!("{d} m"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let _ = writeln!(md, "- training loss: {}", loss_label(config));
    let d = formats::fmt_f64(config.eval.d);
    let composite = match config.eval.angle_form {
        AngleForm::Exact => format!("position + {d} tan(angle)"),
        AngleForm::Approximate => format!("position + {d} angle"),
    };
    let _ = writeln!(md, "- composite metric: {composite}\n");

    let mut any = false;
    let mut table = String::from(
        "| trajectory | poses | mean pos (m) | median pos (m) | RMSE (m) | median angle (deg) | median composite (m) |\n\
         |---|---|---|---|---|---|---|\n",
    );
    for label in ["checkpoint", "estimator", "fused"] {
        let path = config.out_dir.join(format!("report_{label}.json"));
        if !path.is_file() {
            continue;
        }
        let r: ExperimentReport = formats::read_json(&path)?;
        let _ = writeln!(
            table,
            "| {label} | {} | {:.4} | {:.4} | {:.4} | {:.3} | {:.4} |",
            r.count,
            r.mean_position_error,
            r.median_position_error,
            r.rmse_position,
            r.median_angular_error.to_degrees(),
            r.median_composite_loss,
        );
        any = true;
    }
    if any {
        let _ = writeln!(md, "## Accuracy\n\n{table}");
    }

    let beta_path = config.out_dir.join("beta_search.json");
    if beta_path.is_file() {
        let search: BetaSearchRecord = formats::read_json(&beta_path)?;
        let _ = writeln!(md, "## Beta grid search\n");
        let _ = writeln!(md, "| beta | val loss | composite | epochs | |");
        let _ = writeln!(md, "|---|---|---|---|---|");
        for (i, t) in search.trials.iter().enumerate() {
            let mark = if i == search.best_index { "best" } else { "" };
            let _ = writeln!(
                md,
                "| {} | {:.6} | {:.6} | {} | {mark} |",
                formats::fmt_f64(t.beta),
                t.val_loss,
                t.eval_loss,
                t.epochs_run
            );
        }
        let _ = writeln!(md);
    }

    let history_path = config.out_dir.join("history.csv");
    if history_path.is_file() {
        let text = fs::read_to_string(&history_path).map_err(|e| CliError::io(&history_path, &e))?;
        let epochs = text.lines().count().saturating_sub(1);
        let last = text.lines().last().unwrap_or("");
        let _ = writeln!(md, "## Training\n");
        let _ = writeln!(md, "- epochs run: {epochs}");
        if let Some((_, rest)) = last.split_once(',') {
            if let Some((train_loss, val_loss)) = rest.split_once(',') {
                let _ = writeln!(md, "- final train loss: {train_loss}");
                let _ = writeln!(md, "- final validation loss: {val_loss}");
            }
        }
        let _ = writeln!(md);
    }

    if !any && !beta_path.is_file() && !history_path.is_file() {
        return Err(CliError::Data(format!(
            "nothing to report in {} (run eval first)",
            config.out_dir.display()
        )));
    }

    let out = config.out_dir.join("report.md");
    fs::write(&out, md).map_err(|e| CliError::io(&out, &e))?;
    println!("report -> {}", out.display());
    Ok(())
}

fn loss_label(config: &ExperimentConfig) -> String {
    use aquapose_core::loss::PoseLoss;
    match &config.train.loss {
        PoseLoss::Beta { beta } => format!("beta = {}", formats::fmt_f64(*beta)),
        PoseLoss::Distance { d, angle_form } => {
            format!("d = {} [{}]", formats::fmt_f64(*d), angle_label(*angle_form))
        }
    }
}

fn angle_label(form: AngleForm) -> &'static str {
    match form {
        AngleForm::Exact => "exact",
        AngleForm::Approximate => "approximate",
    }
}
