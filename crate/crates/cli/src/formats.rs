//! On-disk interchange formats: binary PGM/PPM images, trajectory
//! CSV, dataset manifests, and network checkpoints.
//!
//! Every writer is deterministic byte for byte: floats are printed in
//! their shortest round-trip form, map-like structures have a fixed
//! field order, and images quantize with a fixed rule.

use std::fs;
use std::path::{Path, PathBuf};

use aquapose_core::data::{PoseNormalization, SampleSource, TimedSample, TrialDataset};
use aquapose_core::geom::{Pose, Quaternion};
use aquapose_core::regressor::{NetConfig, NetParams};
use aquapose_core::scene::Image;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const TRAJECTORY_HEADER: &[&str] =
    &["t", "x", "y", "z", "qw", "qx", "qy", "qz", "source", "image_path"];

/// Writes `image` as binary netpbm: P5 for single-channel, P6 for
/// three-channel, 8 bits per sample, values clamped then rounded.
pub fn write_image(path: &Path, image: &Image) -> Result<(), CliError> {
    let magic = match image.channels() {
        1 => "P5",
        3 => "P6",
        _ => {
            return Err(CliError::Data(format!(
                "{}: only 1- or 3-channel images can be stored",
                path.display()
            )))
        }
    };
    let mut bytes = Vec::with_capacity(image.data().len() + 32);
    bytes.extend_from_slice(
        format!("{magic}\n{} {}\n255\n", image.width(), image.height()).as_bytes(),
    );
    bytes.extend(image.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    fs::write(path, bytes).map_err(|e| CliError::io(path, &e))
}

/// Reads a binary P5/P6 image back into the `[0, 1]` float raster.
pub fn read_image(path: &Path) -> Result<Image, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, &e))?;
    let bad = |reason: &str| CliError::Data(format!("{}: {reason}", path.display()));
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1u32,
        Some(b"P6") => 3u32,
        _ => return Err(bad("not a binary PGM/PPM file")),
    };
    // Header: magic, width, height, maxval — whitespace separated.
    let mut fields = Vec::new();
    let mut pos = 2;
    while fields.len() < 3 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(
            std::str::from_utf8(&bytes[start..pos])
                .ok()
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or_else(|| bad("malformed header field"))?,
        );
    }
    let (width, height, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(bad("only 8-bit images are supported"));
    }
    pos += 1;
    let expected = (width * height * channels) as usize;
    let data = bytes.get(pos..pos + expected).ok_or_else(|| bad("truncated pixel data"))?;
    let floats = data.iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(width, height, channels, floats).map_err(CliError::from)
}

/// One CSV row; `ptrace` appears only in fused trajectories.
#[derive(Clone, Debug)]
pub struct TrajectoryRow {
    pub t: f64,
    pub pose: Pose,
    pub source: SampleSource,
    pub image_path: String,
    pub ptrace: Option<f64>,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes trajectory rows; `with_ptrace` appends the covariance-trace
/// column used by fused outputs.
pub fn write_trajectory_csv(
    path: &Path,
    rows: &[TrajectoryRow],
    with_ptrace: bool,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = TRAJECTORY_HEADER.to_vec();
    if with_ptrace {
        header.push("ptrace");
    }
    w.write_record(&header).map_err(|e| CliError::Data(e.to_string()))?;
    for row in rows {
        let q = row.pose.orientation;
        let mut record = vec![
            fmt_f64(row.t),
            fmt_f64(row.pose.position.x),
            fmt_f64(row.pose.position.y),
            fmt_f64(row.pose.position.z),
            fmt_f64(q.w),
            fmt_f64(q.x),
            fmt_f64(q.y),
            fmt_f64(q.z),
            row.source.to_string(),
            row.image_path.clone(),
        ];
        if with_ptrace {
            record.push(row.ptrace.map(fmt_f64).unwrap_or_default());
        }
        w.write_record(&record).map_err(|e| CliError::Data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, &e))
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRow>, CliError> {
    let bad = |reason: String| CliError::Data(format!("{}: {reason}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    {
        let headers = reader.headers().map_err(|e| bad(e.to_string()))?;
        let got: Vec<&str> = headers.iter().collect();
        let ok = got.len() >= TRAJECTORY_HEADER.len()
            && got[..TRAJECTORY_HEADER.len()] == *TRAJECTORY_HEADER
            && (got.len() == TRAJECTORY_HEADER.len()
                || (got.len() == TRAJECTORY_HEADER.len() + 1 && got[10] == "ptrace"));
        if !ok {
            return Err(bad(format!("unexpected CSV header {got:?}")));
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |j: usize| -> Result<f64, CliError> {
            record
                .get(j)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| bad(format!("row {i}: bad numeric field {j}")))
        };
        let pose = Pose::new(
            Vector3::new(field(1)?, field(2)?, field(3)?),
            Quaternion::new(field(4)?, field(5)?, field(6)?, field(7)?),
        );
        let source: SampleSource = record
            .get(8)
            .ok_or_else(|| bad(format!("row {i}: missing source")))?
            .parse()
            .map_err(|_| bad(format!("row {i}: unknown source")))?;
        let ptrace = match record.get(10) {
            None | Some("") => None,
            Some(s) => {
                Some(s.parse::<f64>().map_err(|_| bad(format!("row {i}: bad ptrace")))?)
            }
        };
        rows.push(TrajectoryRow {
            t: field(0)?,
            pose,
            source,
            image_path: record.get(9).unwrap_or_default().to_string(),
            ptrace,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ManifestNormalization {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Dataset manifest; paths are relative to the manifest's directory.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub csv_path: String,
    pub image_dir: String,
    pub normalization: Option<ManifestNormalization>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, &e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, &e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

impl From<PoseNormalization> for ManifestNormalization {
    fn from(n: PoseNormalization) -> Self {
        ManifestNormalization {
            min: [n.min.x, n.min.y, n.min.z],
            max: [n.max.x, n.max.y, n.max.z],
        }
    }
}

impl TryFrom<&ManifestNormalization> for PoseNormalization {
    type Error = CliError;

    fn try_from(m: &ManifestNormalization) -> Result<Self, CliError> {
        PoseNormalization::new(Vector3::from(m.min), Vector3::from(m.max)).map_err(CliError::from)
    }
}

/// Writes a dataset directory: `trajectory.csv`, one image file per
/// camera sample under `images/`, and `manifest.json`. Returns the
/// manifest path.
pub fn write_dataset(
    dir: &Path,
    name: &str,
    trial: &TrialDataset,
    normalization: Option<PoseNormalization>,
) -> Result<PathBuf, CliError> {
    let image_dir = dir.join("images");
    fs::create_dir_all(&image_dir).map_err(|e| CliError::io(&image_dir, &e))?;
    let mut rows = Vec::with_capacity(trial.len());
    for (k, sample) in trial.samples().iter().enumerate() {
        let pose = sample.pose.ok_or_else(|| {
            CliError::Data(format!("sample {k} has no pose; datasets store labeled samples"))
        })?;
        let image_path = match &sample.image {
            Some(image) => {
                let ext = if image.channels() == 1 { "pgm" } else { "ppm" };
                let rel = format!("images/frame_{k:06}.{ext}");
                write_image(&dir.join(&rel), image)?;
                rel
            }
            None => String::new(),
        };
        rows.push(TrajectoryRow {
            t: sample.timestamp,
            pose,
            source: sample.source,
            image_path,
            ptrace: None,
        });
    }
    write_trajectory_csv(&dir.join("trajectory.csv"), &rows, false)?;
    let manifest = DatasetManifest {
        name: name.to_string(),
        csv_path: "trajectory.csv".to_string(),
        image_dir: "images".to_string(),
        normalization: normalization.map(Into::into),
    };
    let manifest_path = dir.join("manifest.json");
    write_json(&manifest_path, &manifest)?;
    Ok(manifest_path)
}

/// Loads a dataset directory back via its manifest.
pub fn load_dataset(
    manifest_path: &Path,
) -> Result<(TrialDataset, Option<PoseNormalization>), CliError> {
    let manifest: DatasetManifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let rows = read_trajectory_csv(&base.join(&manifest.csv_path))?;
    let mut samples = Vec::with_capacity(rows.len());
    for row in rows {
        let image = if row.image_path.is_empty() {
            None
        } else {
            Some(read_image(&base.join(&row.image_path))?)
        };
        samples.push(TimedSample {
            timestamp: row.t,
            image,
            pose: Some(row.pose),
            source: row.source,
        });
    }
    let norm = manifest
        .normalization
        .as_ref()
        .map(PoseNormalization::try_from)
        .transpose()?;
    Ok((TrialDataset::new(samples)?, norm))
}

/// Versioned checkpoint: network shape, flat parameters, and the
/// normalization the parameters were trained under. JSON floats are
/// shortest-round-trip, so save/load is bit-exact.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub net: NetConfig,
    pub values: Vec<f64>,
    pub normalization: ManifestNormalization,
}

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(
    path: &Path,
    params: &NetParams,
    normalization: PoseNormalization,
) -> Result<(), CliError> {
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        net: params.config().clone(),
        values: params.values().to_vec(),
        normalization: normalization.into(),
    };
    write_json(path, &checkpoint)
}

pub fn read_checkpoint(path: &Path) -> Result<(NetParams, PoseNormalization), CliError> {
    let checkpoint: Checkpoint = read_json(path)?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(CliError::Data(format!(
            "{}: unsupported checkpoint version {}",
            path.display(),
            checkpoint.version
        )));
    }
    let norm = PoseNormalization::try_from(&checkpoint.normalization)?;
    let params = NetParams::from_values(checkpoint.net, checkpoint.values)?;
    Ok((params, norm))
}
