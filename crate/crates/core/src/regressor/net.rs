//! Forward pass, backpropagation, and Monte Carlo dropout inference.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geom::{Pose, Quaternion};
use crate::loss::{pose_loss_value_grad, PoseLoss};
use crate::regressor::{NetConfig, NetError, NetParams, OUTPUT_DIM};
use crate::rng::derive_seed;
use crate::scene::Image;

/// Number of stochastic forward passes used for uncertainty estimates
/// unless a config overrides it.
pub const DEFAULT_MC_SAMPLES: usize = 100;

/// Dropout behaviour of a single forward pass.
///
/// `Seeded` draws the mask from the given seed, so a pass is exactly
/// reproducible; batch helpers derive one seed per batch position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropoutMode {
    Off,
    Seeded(u64),
}

/// Weight/bias slice pair of one layer inside the flat parameter
/// vector.
struct Slices {
    w: Range<usize>,
    b: Range<usize>,
}

fn layer_slices(config: &NetConfig) -> (Vec<Slices>, Vec<Slices>) {
    let mut offset = 0;
    let mut take = |n: usize| {
        let r = offset..offset + n;
        offset += n;
        r
    };
    let shapes = config.conv_shapes();
    let conv = config
        .conv
        .iter()
        .enumerate()
        .map(|(i, spec)| Slices {
            w: take(spec.filters * shapes[i].0 * spec.kernel * spec.kernel),
            b: take(spec.filters),
        })
        .collect();
    let dense = config
        .dense_dims()
        .windows(2)
        .map(|pair| Slices { w: take(pair[0] * pair[1]), b: take(pair[1]) })
        .collect();
    (conv, dense)
}

pub(crate) struct Trace {
    /// `[0]` is the planar input; `[i+1]` the post-ReLU output of conv
    /// block `i`. The last entry doubles as the flattened dense input.
    conv_acts: Vec<Vec<f64>>,
    /// Input vector of each dense layer; the head's entry is the
    /// post-dropout activation.
    dense_inputs: Vec<Vec<f64>>,
    /// Multiplicative dropout factors (`0` or `1/(1-rate)`), when the
    /// site was active.
    mask: Option<Vec<f64>>,
    pub output: [f64; OUTPUT_DIM],
}

impl NetParams {
    fn planar_input(&self, image: &Image) -> Result<Vec<f64>, NetError> {
        let cfg = self.config();
        let expected = (cfg.input_width, cfg.input_height, cfg.input_channels);
        let got = (image.width(), image.height(), image.channels());
        if expected != got {
            return Err(NetError::ShapeMismatch { expected, got });
        }
        let (w, h, c) = (image.width(), image.height(), image.channels());
        let mut planar = vec![0.0; (w * h * c) as usize];
        let plane = (w * h) as usize;
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    planar[ch as usize * plane + (y * w + x) as usize] = image.get(x, y, ch);
                }
            }
        }
        Ok(planar)
    }

    fn dropout_mask(&self, mode: DropoutMode, dim: usize) -> Option<Vec<f64>> {
        let rate = self.config().dropout_rate;
        let DropoutMode::Seeded(seed) = mode else { return None };
        if rate == 0.0 {
            return None;
        }
        let scale = 1.0 / (1.0 - rate);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Some(
            (0..dim)
                .map(|_| if rng.random::<f64>() < rate { 0.0 } else { scale })
                .collect(),
        )
    }

    pub(crate) fn forward_traced(&self, image: &Image, mode: DropoutMode) -> Result<Trace, NetError> {
        let cfg = self.config();
        let (conv_slices, dense_slices) = layer_slices(cfg);
        let shapes = cfg.conv_shapes();

        let mut conv_acts = Vec::with_capacity(cfg.conv.len() + 1);
        conv_acts.push(self.planar_input(image)?);
        for (i, spec) in cfg.conv.iter().enumerate() {
            let (ic, ih, iw) = shapes[i];
            let (oc, oh, ow) = shapes[i + 1];
            let wgt = &self.values()[conv_slices[i].w.clone()];
            let bias = &self.values()[conv_slices[i].b.clone()];
            let input = conv_acts.last().unwrap();
            let mut out = vec![0.0; oc * oh * ow];
            let k = spec.kernel;
            for f in 0..oc {
                let wf = &wgt[f * ic * k * k..(f + 1) * ic * k * k];
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = bias[f];
                        for ci in 0..ic {
                            let wc = &wf[ci * k * k..(ci + 1) * k * k];
                            let base = ci * ih * iw + oy * spec.stride * iw + ox * spec.stride;
                            for ky in 0..k {
                                let row = &input[base + ky * iw..base + ky * iw + k];
                                let wr = &wc[ky * k..ky * k + k];
                                for kx in 0..k {
                                    acc += wr[kx] * row[kx];
                                }
                            }
                        }
                        out[(f * oh + oy) * ow + ox] = acc.max(0.0);
                    }
                }
            }
            conv_acts.push(out);
        }

        let dims = cfg.dense_dims();
        let n_dense = dims.len() - 1;
        let mut dense_inputs = Vec::with_capacity(n_dense);
        let mut act = conv_acts.last().unwrap().clone();
        let mut mask_store = None;
        for j in 0..n_dense {
            let is_head = j == n_dense - 1;
            if is_head {
                // Dropout sits between the last hidden layer and the
                // linear head.
                if let Some(mask) = self.dropout_mask(mode, act.len()) {
                    for (a, m) in act.iter_mut().zip(&mask) {
                        *a *= m;
                    }
                    mask_store = Some(mask);
                }
            }
            dense_inputs.push(act);
            let input = dense_inputs.last().unwrap();
            let wgt = &self.values()[dense_slices[j].w.clone()];
            let bias = &self.values()[dense_slices[j].b.clone()];
            let (in_dim, out_dim) = (dims[j], dims[j + 1]);
            let mut out = vec![0.0; out_dim];
            for o in 0..out_dim {
                let row = &wgt[o * in_dim..(o + 1) * in_dim];
                let mut acc = bias[o];
                for i in 0..in_dim {
                    acc += row[i] * input[i];
                }
                out[o] = if is_head { acc } else { acc.max(0.0) };
            }
            act = out;
        }

        let mut output = [0.0; OUTPUT_DIM];
        output.copy_from_slice(&act);
        Ok(Trace { conv_acts, dense_inputs, mask: mask_store, output })
    }

    /// Single forward pass.
    pub fn forward(&self, image: &Image, mode: DropoutMode) -> Result<[f64; OUTPUT_DIM], NetError> {
        Ok(self.forward_traced(image, mode)?.output)
    }

    /// Accumulates `∂loss/∂params` for one traced pass into `grads`.
    pub(crate) fn backward(&self, trace: &Trace, grad_out: &[f64; OUTPUT_DIM], grads: &mut [f64]) {
        let cfg = self.config();
        let (conv_slices, dense_slices) = layer_slices(cfg);
        let dims = cfg.dense_dims();
        let n_dense = dims.len() - 1;

        let mut g: Vec<f64> = grad_out.to_vec();
        for j in (0..n_dense).rev() {
            let input = &trace.dense_inputs[j];
            let (in_dim, out_dim) = (dims[j], dims[j + 1]);
            let wgt = &self.values()[dense_slices[j].w.clone()];
            let mut gin = vec![0.0; in_dim];
            {
                let gw = &mut grads[dense_slices[j].w.clone()];
                for o in 0..out_dim {
                    let go = g[o];
                    let grow = &mut gw[o * in_dim..(o + 1) * in_dim];
                    let wrow = &wgt[o * in_dim..(o + 1) * in_dim];
                    for i in 0..in_dim {
                        grow[i] += go * input[i];
                        gin[i] += wrow[i] * go;
                    }
                }
            }
            let gb = &mut grads[dense_slices[j].b.clone()];
            for o in 0..out_dim {
                gb[o] += g[o];
            }
            if j > 0 {
                if j == n_dense - 1 {
                    if let Some(mask) = &trace.mask {
                        for (gi, m) in gin.iter_mut().zip(mask) {
                            *gi *= m;
                        }
                    }
                }
                // ReLU of the previous hidden layer. Its stored input
                // is positive exactly where the pre-activation was
                // (dropout only rescales positives).
                for (gi, a) in gin.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            g = gin;
        }

        let shapes = cfg.conv_shapes();
        for i in (0..cfg.conv.len()).rev() {
            let spec = cfg.conv[i];
            let (ic, ih, iw) = shapes[i];
            let (oc, oh, ow) = shapes[i + 1];
            let post = &trace.conv_acts[i + 1];
            for (gi, a) in g.iter_mut().zip(post) {
                if *a <= 0.0 {
                    *gi = 0.0;
                }
            }
            let input = &trace.conv_acts[i];
            let wgt = &self.values()[conv_slices[i].w.clone()];
            let mut gin = vec![0.0; ic * ih * iw];
            let k = spec.kernel;
            for f in 0..oc {
                let wf = &wgt[f * ic * k * k..(f + 1) * ic * k * k];
                for oy in 0..oh {
                    for ox in 0..ow {
                        let go = g[(f * oh + oy) * ow + ox];
                        if go == 0.0 {
                            continue;
                        }
                        grads[conv_slices[i].b.start + f] += go;
                        for ci in 0..ic {
                            let base = ci * ih * iw + oy * spec.stride * iw + ox * spec.stride;
                            let wc = &wf[ci * k * k..(ci + 1) * k * k];
                            let gwc = conv_slices[i].w.start + f * ic * k * k + ci * k * k;
                            for ky in 0..k {
                                for kx in 0..k {
                                    let idx = base + ky * iw + kx;
                                    grads[gwc + ky * k + kx] += go * input[idx];
                                    gin[idx] += wc[ky * k + kx] * go;
                                }
                            }
                        }
                    }
                }
            }
            g = gin;
        }
    }

    /// Mean loss over a batch and its gradient with respect to every
    /// parameter, as one flat vector in parameter layout.
    ///
    /// Under `DropoutMode::Seeded(s)`, sample `i` uses the mask seed
    /// derived from `(s, i)` — dropout is tied to batch position.
    pub fn loss_and_gradients(
        &self,
        batch: &[(&Image, Pose)],
        loss: &PoseLoss,
        mode: DropoutMode,
    ) -> Result<(f64, Vec<f64>), NetError> {
        if batch.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        let mut grads = vec![0.0; self.len()];
        let mut total = 0.0;
        for (i, (image, target)) in batch.iter().enumerate() {
            let sample_mode = match mode {
                DropoutMode::Off => DropoutMode::Off,
                DropoutMode::Seeded(s) => DropoutMode::Seeded(derive_seed(s, i as u64)),
            };
            let trace = self.forward_traced(image, sample_mode)?;
            let (value, grad_out) = pose_loss_value_grad(&trace.output, target, loss)?;
            total += value;
            self.backward(&trace, &grad_out, &mut grads);
        }
        let inv = 1.0 / batch.len() as f64;
        for gr in grads.iter_mut() {
            *gr *= inv;
        }
        Ok((total * inv, grads))
    }

    /// Monte Carlo dropout: `k` stochastic passes with seeds derived
    /// from `(seed, pass)`.
    ///
    /// Quaternion samples are folded onto the hemisphere of the first
    /// pass before averaging, so the double cover cannot cancel the
    /// mean. `std` is the per-component sample standard deviation
    /// (k−1 divisor) in the same aligned frame.
    pub fn mc_dropout_predict(
        &self,
        image: &Image,
        k: usize,
        seed: u64,
    ) -> Result<McPrediction, NetError> {
        if self.config().dropout_rate == 0.0 {
            return Err(NetError::NoDropoutLayer);
        }
        if k < 2 {
            return Err(NetError::InsufficientMcSamples { k });
        }
        let mut samples = Vec::with_capacity(k);
        for pass in 0..k {
            let mode = DropoutMode::Seeded(derive_seed(seed, pass as u64));
            let mut out = self.forward(image, mode)?;
            if pass > 0 {
                let first: &[f64; OUTPUT_DIM] = &samples[0];
                let dot: f64 = (3..7).map(|i| out[i] * first[i]).sum();
                if dot < 0.0 {
                    for v in &mut out[3..7] {
                        *v = -*v;
                    }
                }
            }
            samples.push(out);
        }
        let kf = k as f64;
        let mut mean = [0.0; OUTPUT_DIM];
        for s in &samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v / kf;
            }
        }
        let mut std = [0.0; OUTPUT_DIM];
        for s in &samples {
            for (o, (v, m)) in s.iter().zip(&mean).enumerate() {
                std[o] += (v - m) * (v - m);
            }
        }
        for v in &mut std {
            *v = (*v / (kf - 1.0)).sqrt();
        }
        Ok(McPrediction { mean, std })
    }
}

/// Aggregate of a Monte Carlo dropout ensemble, in the packed
/// `[x, y, z, qw, qx, qy, qz]` layout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McPrediction {
    pub mean: [f64; OUTPUT_DIM],
    pub std: [f64; OUTPUT_DIM],
}

impl McPrediction {
    /// Mean as a pose; the averaged quaternion is normalized.
    pub fn pose(&self) -> Result<Pose, NetError> {
        let q = Quaternion::new(self.mean[3], self.mean[4], self.mean[5], self.mean[6])
            .normalize()
            .map_err(|_| NetError::DegenerateMeanQuaternion)?;
        Ok(Pose::new(
            nalgebra::Vector3::new(self.mean[0], self.mean[1], self.mean[2]),
            q,
        ))
    }
}
