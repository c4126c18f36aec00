//! Loss vocabulary: binary masks, the extractor, the suppression penalty,
//! softmax cross-entropy and multi-label logistic loss.
//!
//! Every loss here has a value kernel and a gradient kernel; the tape in
//! [`crate::autograd`] wires them into the graph.

use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    Foreground,
    Background,
}

impl Polarity {
    pub fn opposite(self) -> Self {
        match self {
            Polarity::Foreground => Polarity::Background,
            Polarity::Background => Polarity::Foreground,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Resolution {
    Image,
    Feature,
}

/// Binary `[H,W]` mask tagged with its polarity and resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    data: Tensor,
    polarity: Polarity,
    resolution: Resolution,
}

impl Mask {
    pub fn new(data: Tensor, polarity: Polarity, resolution: Resolution) -> Result<Self> {
        if data.rank() != 2 {
            return Err(shape_err!("mask must be [H,W], got {:?}", data.shape()));
        }
        if let Some(bad) = data.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mask entries must be 0 or 1, found {bad}"
            )));
        }
        Ok(Self {
            data,
            polarity,
            resolution,
        })
    }

    /// All-zeros mask: the marker for a sample without privileged annotation.
    pub fn sentinel(
        height: usize,
        width: usize,
        polarity: Polarity,
        resolution: Resolution,
    ) -> Self {
        Self {
            data: Tensor::zeros(&[height, width]),
            polarity,
            resolution,
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        polarity: Polarity,
        resolution: Resolution,
        mut inside: impl FnMut(usize, usize) -> bool,
    ) -> Self {
        let data = Tensor::from_fn(&[height, width], |i| {
            if inside(i / width, i % width) {
                1.0
            } else {
                0.0
            }
        });
        Self {
            data,
            polarity,
            resolution,
        }
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn height(&self) -> usize {
        self.data.dim(0)
    }

    pub fn width(&self) -> usize {
        self.data.dim(1)
    }

    pub fn is_sentinel(&self) -> bool {
        self.data.data().iter().all(|&v| v == 0.0)
    }

    pub fn count_ones(&self) -> usize {
        self.data.data().iter().filter(|&&v| v == 1.0).count()
    }

    /// `1 - mask` with the opposite polarity.
    pub fn complement(&self) -> Self {
        Self {
            data: self.data.map(|v| 1.0 - v),
            polarity: self.polarity.opposite(),
            resolution: self.resolution,
        }
    }
}

/// Foreground/background masks for one sample at one resolution.
///
/// Privileged samples satisfy `fg + bg = 1`; samples without annotation carry
/// the all-zeros sentinel in both slots.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskPair {
    pub fg: Mask,
    pub bg: Mask,
}

impl MaskPair {
    pub fn from_foreground(fg: Mask) -> Result<Self> {
        if fg.polarity() != Polarity::Foreground {
            return Err(Error::InvalidArgument(
                "MaskPair::from_foreground needs a foreground mask".into(),
            ));
        }
        let bg = fg.complement();
        Ok(Self { fg, bg })
    }

    pub fn sentinel(height: usize, width: usize, resolution: Resolution) -> Self {
        Self {
            fg: Mask::sentinel(height, width, Polarity::Foreground, resolution),
            bg: Mask::sentinel(height, width, Polarity::Background, resolution),
        }
    }

    pub fn is_sentinel(&self) -> bool {
        self.fg.is_sentinel() && self.bg.is_sentinel()
    }
}

/// Stacks per-sample masks into one `[B,h,w]` gate.
pub fn stack_masks<'a>(masks: impl IntoIterator<Item = &'a Mask>) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut dims: Option<(usize, usize)> = None;
    let mut count = 0;
    for m in masks {
        let d = (m.height(), m.width());
        match dims {
            None => dims = Some(d),
            Some(prev) if prev != d => {
                return Err(shape_err!("masks in a batch differ: {prev:?} vs {d:?}"));
            }
            _ => {}
        }
        data.extend_from_slice(m.data().data());
        count += 1;
    }
    let (h, w) = dims.ok_or_else(|| Error::InvalidArgument("empty mask batch".into()))?;
    Tensor::new(&[count, h, w], data)
}

/// Elementwise product of every `[h,w]` plane of `features: [B,C,h,w]` with the
/// matching sample's gate from `gate: [B,h,w]`.
pub fn gate_features(features: &Tensor, gate: &Tensor) -> Result<Tensor> {
    let [b, c, h, w] = *features.shape() else {
        return Err(shape_err!(
            "features must be [B,C,h,w], got {:?}",
            features.shape()
        ));
    };
    if gate.shape() != [b, h, w] {
        return Err(shape_err!(
            "mask resolution {:?} does not match features {:?}; downsample the mask first",
            gate.shape(),
            features.shape()
        ));
    }
    let plane = h * w;
    let mut out = features.clone();
    for (idx, dst) in out.data_mut().chunks_mut(plane).enumerate() {
        let g = &gate.data()[(idx / c) * plane..(idx / c + 1) * plane];
        dst.iter_mut().zip(g).for_each(|(v, m)| *v *= m);
    }
    Ok(out)
}

/// Extractor: `feature ⊙ mask`, broadcast over batch and channel.
pub fn extract(feature: &Tensor, mask: &Mask) -> Result<Tensor> {
    let [b, _, h, w] = *feature.shape() else {
        return Err(shape_err!(
            "features must be [B,C,h,w], got {:?}",
            feature.shape()
        ));
    };
    if (mask.height(), mask.width()) != (h, w) {
        return Err(shape_err!(
            "mask is {}x{} but feature maps are {h}x{w}; downsample the mask first",
            mask.height(),
            mask.width()
        ));
    }
    let gate = stack_masks(std::iter::repeat_n(mask, b))?;
    gate_features(feature, &gate)
}

/// Squared Frobenius norm of the gated features, averaged over `B·G·h·w`.
pub fn suppression_loss(features: &Tensor, masks: &[Mask]) -> Result<f64> {
    let gate = stack_masks(masks)?;
    let gated = gate_features(features, &gate)?;
    Ok(mean_square(&gated))
}

pub fn mean_square(t: &Tensor) -> f64 {
    t.data().iter().map(|v| v * v).sum::<f64>() / t.numel() as f64
}

/// Mean negative log-likelihood and the softmax probabilities.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let [b, k] = *logits.shape() else {
        return Err(shape_err!("logits must be [B,K], got {:?}", logits.shape()));
    };
    if labels.len() != b {
        return Err(shape_err!("{} labels for a batch of {b}", labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {k} classes"
        )));
    }
    let mut probs = Vec::with_capacity(b * k);
    let mut total = 0.0;
    for (row, &label) in logits.data().chunks(k).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|z| (z - max).exp()).sum();
        let log_norm = sum_exp.ln();
        total += log_norm - (row[label] - max);
        probs.extend(row.iter().map(|z| (z - max).exp() / sum_exp));
    }
    Ok((total / b as f64, Tensor::new(&[b, k], probs)?))
}

/// Gradient of [`softmax_cross_entropy`] w.r.t. the logits.
pub fn softmax_cross_entropy_grad(probs: &Tensor, labels: &[usize]) -> Tensor {
    let (b, k) = (probs.dim(0), probs.dim(1));
    let mut g = probs.clone();
    for (row, &label) in g.data_mut().chunks_mut(k).zip(labels) {
        row[label] -= 1.0;
        row.iter_mut().for_each(|v| *v /= b as f64);
    }
    g
}

fn check_binary_targets(logits: &Tensor, targets: &Tensor) -> Result<()> {
    if logits.rank() != 2 {
        return Err(shape_err!("logits must be [B,K], got {:?}", logits.shape()));
    }
    logits.check_same_shape(targets)?;
    if let Some(bad) = targets.data().iter().find(|&&t| t != 0.0 && t != 1.0) {
        return Err(Error::InvalidArgument(format!(
            "multi-label targets must be 0 or 1, found {bad}"
        )));
    }
    Ok(())
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy over all `B·K` logits.
pub fn multilabel_logistic_loss(logits: &Tensor, targets: &Tensor) -> Result<f64> {
    check_binary_targets(logits, targets)?;
    let total: f64 = logits
        .data()
        .iter()
        .zip(targets.data())
        .map(|(&z, &t)| softplus(z) - t * z)
        .sum();
    Ok(total / logits.numel() as f64)
}

pub fn multilabel_logistic_grad(logits: &Tensor, targets: &Tensor) -> Tensor {
    let n = logits.numel() as f64;
    let mut g = logits.map(sigmoid);
    g.data_mut()
        .iter_mut()
        .zip(targets.data())
        .for_each(|(v, t)| *v = (*v - t) / n);
    g
}

/// One-hot `[B,K]` targets for single-label samples.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Tensor> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(Tensor::from_fn(&[labels.len(), classes], |i| {
        if labels[i / classes] == i % classes {
            1.0
        } else {
            0.0
        }
    }))
}

/// Weights of the five loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub main: f64,
    pub fg: f64,
    pub bg: f64,
    pub suppression: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            main: 1.0,
            fg: 1.0,
            bg: 1.0,
            suppression: 1.0,
        }
    }
}
