//! Experiment configuration: one TOML or JSON file drives every
//! subcommand. `--out` and `--seed` override the corresponding keys;
//! the single-seed override derives per-stage seeds by offset.

use std::fs;
use std::path::{Path, PathBuf};

use aquapose_core::augment::{ColorJitterConfig, PoseSynthesisConfig};
use aquapose_core::fusion::FilterConfig;
use aquapose_core::loss::AngleForm;
use aquapose_core::regressor::{NetConfig, TrainConfig};
use aquapose_core::scene::{CameraIntrinsics, ScenePreset, SweepMode, WaterColumn};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneSection {
    pub preset: ScenePreset,
}

/// Survey pattern shared by every depth band; each entry of `depths`
/// becomes one trial.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectorySection {
    #[serde(default = "default_depths")]
    pub depths: Vec<f64>,
    pub standoff: f64,
    pub line_spacing: f64,
    pub sample_spacing: f64,
    pub mode: SweepMode,
    pub rate_hz: f64,
}

fn default_depths() -> Vec<f64> {
    vec![-1.5, -3.0, -4.0]
}

/// How train/val/test sets are carved out of the simulated bands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    /// One band split into train/val/test by `fractions`.
    Split,
    /// Train on `train_bands`, validate and test on halves of
    /// `eval_band`.
    CrossBand,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DataSection {
    pub mode: DataMode,
    #[serde(default)]
    pub train_bands: Vec<usize>,
    #[serde(default)]
    pub eval_band: usize,
    #[serde(default = "default_fractions")]
    pub fractions: [f64; 3],
    /// Concatenate the augmented dataset into training, when present.
    #[serde(default)]
    pub use_augmented: bool,
}

fn default_fractions() -> [f64; 3] {
    [0.6, 0.2, 0.2]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AugmentSection {
    pub synthesis: PoseSynthesisConfig,
    /// Added to the water's brightness bias when rendering augmented
    /// views, mimicking a renderer that does not match the camera.
    #[serde(default)]
    pub brightness_bias: f64,
    #[serde(default)]
    pub jitter: Option<ColorJitterConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalSection {
    /// Working distance for the composite loss, meters.
    pub d: f64,
    pub angle_form: AngleForm,
    /// Evaluate the raw checkpoint, the fused trajectory, or both.
    #[serde(default = "default_eval_targets")]
    pub targets: Vec<EvalTarget>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalTarget {
    Checkpoint,
    Fused,
}

fn default_eval_targets() -> Vec<EvalTarget> {
    vec![EvalTarget::Checkpoint]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FuseSection {
    /// Band index the filter runs on.
    pub band: usize,
    pub compass_rate_hz: f64,
    pub altimeter_rate_hz: f64,
}

/// Per-stage seeds. `--seed N` replaces them with `N`, `N+1`, … in
/// field order; the training seed lives in `[train].seed`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedSection {
    pub simulate: u64,
    pub split: u64,
    pub augment: u64,
    pub fuse: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub out_dir: PathBuf,
    pub scene: SceneSection,
    pub camera: CameraIntrinsics,
    #[serde(default)]
    pub water: WaterColumn,
    pub trajectory: TrajectorySection,
    pub data: DataSection,
    pub net: NetConfig,
    pub train: TrainConfig,
    /// Optional β grid; when set with a β-loss, training grid-searches
    /// over it.
    #[serde(default)]
    pub beta_grid: Vec<f64>,
    pub augment: AugmentSection,
    #[serde(default)]
    pub filter: FilterConfig,
    pub fuse: FuseSection,
    pub eval: EvalSection,
    pub seeds: SeedSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let config: ExperimentConfig = if is_json {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn apply_overrides(&mut self, out: Option<PathBuf>, seed: Option<u64>) {
        if let Some(out) = out {
            self.out_dir = out;
        }
        if let Some(seed) = seed {
            self.seeds.simulate = seed;
            self.seeds.split = seed.wrapping_add(1);
            self.train.seed = seed.wrapping_add(2);
            self.seeds.augment = seed.wrapping_add(3);
            self.seeds.fuse = seed.wrapping_add(4);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |reason: String| Err(CliError::Config(reason));
        if self.name.is_empty() {
            return cfg("experiment name must not be empty".into());
        }
        if self.trajectory.depths.is_empty() {
            return cfg("trajectory.depths must list at least one band".into());
        }
        if !(self.trajectory.rate_hz > 0.0) || !self.trajectory.rate_hz.is_finite() {
            return cfg("trajectory.rate_hz must be positive".into());
        }
        self.camera.validate()?;
        self.water.validate()?;
        self.net.validate()?;
        self.train.validate()?;
        self.augment.synthesis.validate()?;
        if let Some(j) = &self.augment.jitter {
            j.validate()?;
        }
        if !self.augment.brightness_bias.is_finite() {
            return cfg("augment.brightness_bias must be finite".into());
        }
        self.filter.validate()?;
        if !(self.eval.d > 0.0) || !self.eval.d.is_finite() {
            return cfg("eval.d must be positive".into());
        }
        if self.eval.targets.is_empty() {
            return cfg("eval.targets must not be empty".into());
        }
        let bands = self.trajectory.depths.len();
        let check_band = |i: usize, what: &str| {
            if i >= bands {
                Err(CliError::Config(format!("{what} index {i} out of range ({bands} bands)")))
            } else {
                Ok(())
            }
        };
        match self.data.mode {
            DataMode::Split => {
                if self.data.train_bands.len() != 1 {
                    return cfg("split mode uses exactly one entry in data.train_bands".into());
                }
                check_band(self.data.train_bands[0], "data.train_bands")?;
            }
            DataMode::CrossBand => {
                if self.data.train_bands.is_empty() {
                    return cfg("cross_band mode needs at least one training band".into());
                }
                for &b in &self.data.train_bands {
                    check_band(b, "data.train_bands")?;
                }
                check_band(self.data.eval_band, "data.eval_band")?;
                if self.data.train_bands.contains(&self.data.eval_band) {
                    return cfg("data.eval_band must not also be a training band".into());
                }
            }
        }
        for f in self.data.fractions {
            if !(f > 0.0) || !f.is_finite() {
                return cfg("data.fractions must be positive".into());
            }
        }
        check_band(self.fuse.band, "fuse.band")?;
        for (v, what) in [
            (self.fuse.compass_rate_hz, "fuse.compass_rate_hz"),
            (self.fuse.altimeter_rate_hz, "fuse.altimeter_rate_hz"),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return cfg(format!("{what} must be positive"));
            }
        }
        for &beta in &self.beta_grid {
            if !(beta > 0.0) || !beta.is_finite() {
                return cfg("beta_grid entries must be positive".into());
            }
        }
        Ok(())
    }

    /// Directory of band `i`'s simulated dataset.
    pub fn band_dir(&self, i: usize) -> PathBuf {
        self.out_dir.join(format!("band_{i}"))
    }

    pub fn band_manifest(&self, i: usize) -> PathBuf {
        self.band_dir(i).join("manifest.json")
    }

    pub fn augmented_dir(&self) -> PathBuf {
        self.out_dir.join("augmented")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join("checkpoint.json")
    }

    pub fn fused_path(&self) -> PathBuf {
        self.out_dir.join("fused.csv")
    }

    pub fn estimator_path(&self) -> PathBuf {
        self.out_dir.join("estimator.csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> String {
        r#"
name = "t"
out_dir = "/tmp/t"

[scene]
preset = "pillar"

[camera]
width = 8
height = 8
hfov = 1.2

[trajectory]
standoff = 2.0
line_spacing = 1.0
sample_spacing = 1.0
mode = "vertical"
rate_hz = 1.0

[data]
mode = "split"
train_bands = [0]

[net]
input_width = 8
input_height = 8
input_channels = 3
conv = [{ filters = 2, kernel = 3, stride = 2 }]
hidden = [4]
dropout_rate = 0.2

[train]
loss = { kind = "distance", d = 3.0, angle_form = "approximate" }
optimizer = "sgd"
learning_rate = 0.01
weight_decay = 0.0
batch_size = 4
max_epochs = 2
patience = 1
seed = 5

[augment]
brightness_bias = 0.0

[augment.synthesis]
depth_offsets = [0.0]
range_scales = [0.9]
keep_orientation = true

[fuse]
band = 0
compass_rate_hz = 1.0
altimeter_rate_hz = 1.0

[eval]
d = 3.0
angle_form = "approximate"

[seeds]
simulate = 1
split = 2
augment = 3
fuse = 4
"#
        .to_string()
    }

    fn load_from(text: &str, ext: &str) -> Result<ExperimentConfig, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(format!("c.{ext}"));
        std::fs::write(&path, text).unwrap();
        ExperimentConfig::load(&path)
    }

    #[test]
    fn depth_bands_default_to_three_survey_levels() {
        let config = load_from(&minimal_toml(), "toml").unwrap();
        assert_eq!(config.trajectory.depths, vec![-1.5, -3.0, -4.0]);
        assert_eq!(config.data.fractions, [0.6, 0.2, 0.2]);
        assert_eq!(config.eval.targets, vec![EvalTarget::Checkpoint]);
        assert!(!config.data.use_augmented);
    }

    #[test]
    fn seed_override_derives_every_stage() {
        let mut config = load_from(&minimal_toml(), "toml").unwrap();
        config.apply_overrides(Some(PathBuf::from("/elsewhere")), Some(40));
        assert_eq!(config.out_dir, PathBuf::from("/elsewhere"));
        assert_eq!(config.seeds.simulate, 40);
        assert_eq!(config.seeds.split, 41);
        assert_eq!(config.train.seed, 42);
        assert_eq!(config.seeds.augment, 43);
        assert_eq!(config.seeds.fuse, 44);
    }

    #[test]
    fn json_configs_load_too() {
        let toml_config = load_from(&minimal_toml(), "toml").unwrap();
        let json = serde_json::to_string_pretty(&toml_config).unwrap();
        let json_config = load_from(&json, "json").unwrap();
        assert_eq!(json_config.name, "t");
        assert_eq!(json_config.train.seed, 5);
    }

    #[test]
    fn band_indices_are_checked() {
        let bad = minimal_toml().replace("train_bands = [0]", "train_bands = [3]");
        assert!(matches!(load_from(&bad, "toml"), Err(CliError::Config(_))));
        let bad = minimal_toml().replace("band = 0", "band = 9");
        assert!(matches!(load_from(&bad, "toml"), Err(CliError::Config(_))));
    }

    #[test]
    fn cross_band_requires_disjoint_eval_band() {
        let text = minimal_toml()
            .replace("mode = \"split\"", "mode = \"cross_band\"")
            .replace("train_bands = [0]", "train_bands = [0, 1]\neval_band = 1");
        assert!(matches!(load_from(&text, "toml"), Err(CliError::Config(_))));
        let ok = minimal_toml()
            .replace("mode = \"split\"", "mode = \"cross_band\"")
            .replace("train_bands = [0]", "train_bands = [0, 1]\neval_band = 2");
        assert!(load_from(&ok, "toml").is_ok());
    }

    #[test]
    fn nested_section_errors_keep_exit_code_two() {
        let bad = minimal_toml().replace("dropout_rate = 0.2", "dropout_rate = 1.5");
        assert!(matches!(load_from(&bad, "toml"), Err(CliError::Config(_))));
        let bad = minimal_toml().replace("range_scales = [0.9]", "range_scales = [-0.9]");
        assert!(matches!(load_from(&bad, "toml"), Err(CliError::Config(_))));
    }
}
