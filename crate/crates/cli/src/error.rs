//! Pipeline error taxonomy, mapped onto process exit codes: 2 for
//! configuration problems, 3 for data problems, 4 for numerical
//! failures at run time.

use std::path::Path;

use aquapose_core::augment::AugmentError;
use aquapose_core::data::DataError;
use aquapose_core::eval::EvalError;
use aquapose_core::fusion::FusionError;
use aquapose_core::loss::LossError;
use aquapose_core::regressor::NetError;
use aquapose_core::scene::SceneError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical error: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    /// Wraps an I/O failure with the path it happened on.
    pub fn io(path: &Path, err: &std::io::Error) -> CliError {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidFractions | DataError::InvalidRate | DataError::InvalidNormalization => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::InvalidConfig { .. } | NetError::EmptyGrid | NetError::NoDropoutLayer
            | NetError::InsufficientMcSamples { .. } => CliError::Config(e.to_string()),
            NetError::ShapeMismatch { .. } | NetError::EmptyBatch => CliError::Data(e.to_string()),
            NetError::Loss(l) => CliError::from(l),
            NetError::DegenerateMeanQuaternion | NetError::DivergedTraining { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        match e {
            LossError::InvalidConfig { .. } => CliError::Config(e.to_string()),
            LossError::ZeroNormQuaternion | LossError::AngleOutOfDomain { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        match e {
            FusionError::InvalidConfig { .. } => CliError::Config(e.to_string()),
            FusionError::InvalidMeasurement { .. }
            | FusionError::OutOfOrder { .. }
            | FusionError::GapExceeded { .. } => CliError::Data(e.to_string()),
            FusionError::Net(n) => CliError::from(n),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<AugmentError> for CliError {
    fn from(e: AugmentError) -> Self {
        match e {
            AugmentError::InvalidConfig { .. } | AugmentError::UnsupportedOrientationMode => {
                CliError::Config(e.to_string())
            }
            AugmentError::EmptyBase | AugmentError::DegenerateGeometry { .. } => {
                CliError::Config(e.to_string())
            }
            AugmentError::Scene(s) => CliError::from(s),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Loss(l) => CliError::from(l),
            EvalError::NonFinite { .. } | EvalError::Geom(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
