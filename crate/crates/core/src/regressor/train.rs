//! Optimizers, the training loop, and the β grid search.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{color_jitter, ColorJitterConfig};
use crate::loss::{pose_loss_value_grad, AngleForm, PoseLoss};
use crate::regressor::{DropoutMode, NetConfig, NetError, NetParams};
use crate::rng::derive_seed;
use crate::scene::Image;

const STREAM_SHUFFLE: u64 = 1;
const STREAM_DROPOUT: u64 = 2;
const STREAM_JITTER: u64 = 3;

/// A labeled training sample: image plus target pose (positions
/// already mapped into the normalized cube).
pub type TrainSample<'a> = (&'a Image, crate::geom::Pose);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub loss: PoseLoss,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    /// L2 penalty coefficient applied to every parameter.
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Photometric augmentation re-drawn per epoch and sample.
    pub jitter: Option<ColorJitterConfig>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        self.loss.validate()?;
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(NetError::InvalidConfig { reason: "learning rate must be positive" });
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(NetError::InvalidConfig { reason: "weight decay must be nonnegative" });
        }
        if self.batch_size == 0 {
            return Err(NetError::InvalidConfig { reason: "batch size must be nonzero" });
        }
        if self.max_epochs == 0 {
            return Err(NetError::InvalidConfig { reason: "max epochs must be nonzero" });
        }
        if self.patience == 0 {
            return Err(NetError::InvalidConfig { reason: "patience must be nonzero" });
        }
        if let Some(j) = &self.jitter {
            j.validate().map_err(|_| NetError::InvalidConfig { reason: "invalid color jitter" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch, not the last one.
    pub params: NetParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Mean loss of deterministic forward passes over a labeled set.
pub fn mean_loss(params: &NetParams, set: &[TrainSample<'_>], loss: &PoseLoss) -> Result<f64, NetError> {
    if set.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    let mut total = 0.0;
    for (image, target) in set {
        let out = params.forward(image, DropoutMode::Off)?;
        total += pose_loss_value_grad(&out, target, loss)?.0;
    }
    Ok(total / set.len() as f64)
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

fn apply_step(params: &mut NetParams, grads: &[f64], cfg: &TrainConfig, adam: &mut Option<AdamState>) {
    let lr = cfg.learning_rate;
    match adam {
        None => {
            for (p, g) in params.values_mut().iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        Some(state) => {
            const B1: f64 = 0.9;
            const B2: f64 = 0.999;
            const EPS: f64 = 1e-8;
            state.t += 1;
            let c1 = 1.0 - B1.powi(state.t as i32);
            let c2 = 1.0 - B2.powi(state.t as i32);
            for (i, (p, g)) in params.values_mut().iter_mut().zip(grads).enumerate() {
                state.m[i] = B1 * state.m[i] + (1.0 - B1) * g;
                state.v[i] = B2 * state.v[i] + (1.0 - B2) * g * g;
                let mh = state.m[i] / c1;
                let vh = state.v[i] / c2;
                *p -= lr * mh / (vh.sqrt() + EPS);
            }
        }
    }
}

/// Minibatch training with early stopping on validation loss.
///
/// Everything stochastic — shuffling, dropout masks, jitter draws — is
/// derived from `cfg.seed`, so a run is exactly repeatable. Jitter is
/// keyed by epoch and original sample index, making it independent of
/// the shuffle order. Returns the parameters of the best validation
/// epoch.
pub fn train(
    initial: NetParams,
    train_set: &[TrainSample<'_>],
    val_set: &[TrainSample<'_>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, NetError> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    let mut params = initial;
    let mut adam = match cfg.optimizer {
        Optimizer::Sgd => None,
        Optimizer::Adam => Some(AdamState { m: vec![0.0; params.len()], v: vec![0.0; params.len()], t: 0 }),
    };

    let shuffle_base = derive_seed(cfg.seed, STREAM_SHUFFLE);
    let dropout_base = derive_seed(cfg.seed, STREAM_DROPOUT);
    let jitter_base = derive_seed(cfg.seed, STREAM_JITTER);

    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut stall = 0;
    let mut step: u64 = 0;

    for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(shuffle_base, epoch as u64));
        order.shuffle(&mut rng);

        let epoch_jitter = derive_seed(jitter_base, epoch as u64);
        let mut train_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let jittered: Option<Vec<Image>> = cfg.jitter.as_ref().map(|j| {
                chunk
                    .iter()
                    .map(|&i| color_jitter(train_set[i].0, j, derive_seed(epoch_jitter, i as u64)))
                    .collect()
            });
            let batch: Vec<(&Image, crate::geom::Pose)> = match &jittered {
                Some(images) => images
                    .iter()
                    .zip(chunk)
                    .map(|(img, &i)| (img, train_set[i].1))
                    .collect(),
                None => chunk.iter().map(|&i| (train_set[i].0, train_set[i].1)).collect(),
            };
            let (value, mut grads) =
                params.loss_and_gradients(&batch, &cfg.loss, DropoutMode::Seeded(derive_seed(dropout_base, step)))?;
            step += 1;
            if !value.is_finite() {
                return Err(NetError::DivergedTraining { epoch });
            }
            if cfg.weight_decay > 0.0 {
                for (g, p) in grads.iter_mut().zip(params.values()) {
                    *g += cfg.weight_decay * p;
                }
            }
            apply_step(&mut params, &grads, cfg, &mut adam);
            train_loss += value * batch.len() as f64;
        }
        train_loss /= train_set.len() as f64;

        let val_loss = mean_loss(&params, val_set, &cfg.loss)?;
        if !val_loss.is_finite() {
            return Err(NetError::DivergedTraining { epoch });
        }
        history.push(EpochStats { epoch, train_loss, val_loss });

        if val_loss < best_val {
            best_val = val_loss;
            best_params = params.clone();
            best_epoch = epoch;
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome { params: best_params, history, best_epoch, best_val_loss: best_val })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaTrial {
    pub beta: f64,
    /// Validation loss under this candidate's own β-loss.
    pub val_loss: f64,
    /// Loss-agnostic comparison metric: validation d-loss at the
    /// evaluation distance, exact angle form.
    pub eval_loss: f64,
    pub wall_seconds: f64,
    pub epochs_run: usize,
}

#[derive(Clone, Debug)]
pub struct BetaSearch {
    pub best_index: usize,
    pub trials: Vec<BetaTrial>,
    /// Trained parameters of the winning candidate.
    pub params: NetParams,
}

/// Trains one model per β candidate from a shared initialization and
/// picks the one with the lowest validation d-loss at `eval_distance`.
/// `clock` supplies monotonic seconds for the per-candidate wall-time
/// report (training itself never consults it).
pub fn grid_search_beta(
    net: &NetConfig,
    init_seed: u64,
    train_set: &[TrainSample<'_>],
    val_set: &[TrainSample<'_>],
    base: &TrainConfig,
    betas: &[f64],
    eval_distance: f64,
    clock: &mut dyn FnMut() -> f64,
) -> Result<BetaSearch, NetError> {
    if betas.is_empty() {
        return Err(NetError::EmptyGrid);
    }
    let metric = PoseLoss::Distance { d: eval_distance, angle_form: AngleForm::Exact };
    metric.validate()?;
    let mut trials = Vec::with_capacity(betas.len());
    let mut best: Option<(usize, f64, NetParams)> = None;
    for (i, &beta) in betas.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.loss = PoseLoss::Beta { beta };
        let start = clock();
        let outcome = train(NetParams::init(net.clone(), init_seed)?, train_set, val_set, &cfg)?;
        let wall_seconds = clock() - start;
        let eval_loss = mean_loss(&outcome.params, val_set, &metric)?;
        trials.push(BetaTrial {
            beta,
            val_loss: outcome.best_val_loss,
            eval_loss,
            wall_seconds,
            epochs_run: outcome.history.len(),
        });
        if best.as_ref().map_or(true, |(_, b, _)| eval_loss < *b) {
            best = Some((i, eval_loss, outcome.params));
        }
    }
    let (best_index, _, params) = best.unwrap();
    Ok(BetaSearch { best_index, trials, params })
}
