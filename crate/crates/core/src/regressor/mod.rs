//! Convolutional pose regressor, written out by hand.
//!
//! The network is deliberately small: a stack of valid-padding
//! convolutions with ReLU, a few dense layers, one inverted-dropout
//! site after the last hidden layer, and a linear 7-unit head emitting
//! position plus a raw quaternion. Forward, backward, and both
//! optimizers live here — no autograd, every gradient is checked
//! against finite differences in the test suite.

mod net;
mod train;

pub use net::{DropoutMode, McPrediction, DEFAULT_MC_SAMPLES};
pub use train::{
    grid_search_beta, train, BetaSearch, BetaTrial, EpochStats, Optimizer, TrainConfig,
    TrainOutcome, TrainSample,
};

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::loss::LossError;

/// Output width of the head: 3 position units plus 4 quaternion units.
pub const OUTPUT_DIM: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NetError {
    InvalidConfig { reason: &'static str },
    ShapeMismatch { expected: (u32, u32, u32), got: (u32, u32, u32) },
    EmptyBatch,
    Loss(LossError),
    /// Monte Carlo dropout needs a dropout site; this net has none.
    NoDropoutLayer,
    InsufficientMcSamples { k: usize },
    DegenerateMeanQuaternion,
    DivergedTraining { epoch: usize },
    EmptyGrid,
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::InvalidConfig { reason } => write!(f, "invalid network config: {reason}"),
            NetError::ShapeMismatch { expected, got } => write!(
                f,
                "image shape {got:?} does not match network input {expected:?} (w, h, c)"
            ),
            NetError::EmptyBatch => write!(f, "batch is empty"),
            NetError::Loss(e) => write!(f, "loss evaluation failed: {e}"),
            NetError::NoDropoutLayer => write!(f, "network has no dropout layer"),
            NetError::InsufficientMcSamples { k } => {
                write!(f, "Monte Carlo dropout needs k >= 2 samples, got {k}")
            }
            NetError::DegenerateMeanQuaternion => {
                write!(f, "mean quaternion over Monte Carlo samples has near-zero norm")
            }
            NetError::DivergedTraining { epoch } => {
                write!(f, "training diverged to a non-finite loss at epoch {epoch}")
            }
            NetError::EmptyGrid => write!(f, "hyperparameter grid is empty"),
        }
    }
}

impl From<LossError> for NetError {
    fn from(e: LossError) -> Self {
        NetError::Loss(e)
    }
}

/// One convolution block: `filters` kernels of side `kernel`, applied
/// with `stride` and no padding, followed by ReLU.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Network architecture. `hidden` lists the dense widths between the
/// flattened feature map and the linear head; dropout sits after the
/// last of them.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetConfig {
    pub input_width: u32,
    pub input_height: u32,
    pub input_channels: u32,
    pub conv: Vec<ConvSpec>,
    pub hidden: Vec<usize>,
    /// Probability of zeroing a unit at the dropout site; 0 disables
    /// the layer entirely.
    pub dropout_rate: f64,
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_width == 0 || self.input_height == 0 {
            return Err(NetError::InvalidConfig { reason: "input dimensions must be nonzero" });
        }
        if self.input_channels != 1 && self.input_channels != 3 {
            return Err(NetError::InvalidConfig { reason: "input channels must be 1 or 3" });
        }
        if self.hidden.is_empty() {
            return Err(NetError::InvalidConfig { reason: "at least one hidden dense layer is required" });
        }
        if self.hidden.iter().any(|&d| d == 0) {
            return Err(NetError::InvalidConfig { reason: "hidden widths must be nonzero" });
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NetError::InvalidConfig { reason: "dropout rate must lie in [0, 1)" });
        }
        let mut h = self.input_height as usize;
        let mut w = self.input_width as usize;
        for spec in &self.conv {
            if spec.filters == 0 || spec.kernel == 0 || spec.stride == 0 {
                return Err(NetError::InvalidConfig { reason: "conv filters, kernel, and stride must be nonzero" });
            }
            if spec.kernel > h || spec.kernel > w {
                return Err(NetError::InvalidConfig { reason: "conv kernel exceeds its input extent" });
            }
            h = (h - spec.kernel) / spec.stride + 1;
            w = (w - spec.kernel) / spec.stride + 1;
        }
        Ok(())
    }

    /// Shape `(channels, height, width)` entering each conv block,
    /// with the final feature-map shape appended.
    pub fn conv_shapes(&self) -> Vec<(usize, usize, usize)> {
        let mut shapes = Vec::with_capacity(self.conv.len() + 1);
        let mut shape = (
            self.input_channels as usize,
            self.input_height as usize,
            self.input_width as usize,
        );
        shapes.push(shape);
        for spec in &self.conv {
            shape = (
                spec.filters,
                (shape.1 - spec.kernel) / spec.stride + 1,
                (shape.2 - spec.kernel) / spec.stride + 1,
            );
            shapes.push(shape);
        }
        shapes
    }

    pub fn flatten_dim(&self) -> usize {
        let (c, h, w) = *self.conv_shapes().last().unwrap();
        c * h * w
    }

    /// Widths of the dense chain: flatten, hidden layers, head.
    pub fn dense_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.flatten_dim());
        dims.extend_from_slice(&self.hidden);
        dims.push(OUTPUT_DIM);
        dims
    }

    pub fn param_count(&self) -> usize {
        let shapes = self.conv_shapes();
        let mut n = 0;
        for (i, spec) in self.conv.iter().enumerate() {
            n += spec.filters * shapes[i].0 * spec.kernel * spec.kernel + spec.filters;
        }
        let dims = self.dense_dims();
        for pair in dims.windows(2) {
            n += pair[0] * pair[1] + pair[1];
        }
        n
    }
}

/// Network weights, stored as one flat vector in a fixed layout:
/// conv blocks in order (weights `[f][c][ky][kx]`, then biases), then
/// each dense layer (weights `[out][in]`, then biases).
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams {
    config: NetConfig,
    values: Vec<f64>,
}

impl NetParams {
    /// Fan-in-scaled uniform initialization, reproducible from `seed`.
    pub fn init(config: NetConfig, seed: u64) -> Result<Self, NetError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(config.param_count());
        let shapes = config.conv_shapes();
        for (i, spec) in config.conv.iter().enumerate() {
            let fan_in = shapes[i].0 * spec.kernel * spec.kernel;
            let bound = 1.0 / (fan_in as f64).sqrt();
            let n = spec.filters * fan_in + spec.filters;
            for _ in 0..n {
                values.push(rng.random_range(-bound..=bound));
            }
        }
        for pair in config.dense_dims().windows(2) {
            let bound = 1.0 / (pair[0] as f64).sqrt();
            for _ in 0..pair[0] * pair[1] + pair[1] {
                values.push(rng.random_range(-bound..=bound));
            }
        }
        debug_assert_eq!(values.len(), config.param_count());
        Ok(NetParams { config, values })
    }

    /// Rebuilds parameters from a flat vector (checkpoint restore).
    pub fn from_values(config: NetConfig, values: Vec<f64>) -> Result<Self, NetError> {
        config.validate()?;
        if values.len() != config.param_count() {
            return Err(NetError::InvalidConfig { reason: "parameter vector length does not match config" });
        }
        Ok(NetParams { config, values })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
