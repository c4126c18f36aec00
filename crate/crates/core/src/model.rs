//! GoCNN assembly.
//!
//! The last convolution layer's channels are split into a foreground group
//! (the first `a/(a+b)` share, 3:1 by default) and a background group. In
//! training the groups feed suppressors, per-group linear classifiers and a
//! main classifier over the concatenated pooled groups. At test time only the
//! main classifier remains, applied to the pooled final layer, so the network
//! is an ordinary CNN.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand_distr::{Distribution, Normal};

use crate::autograd::{Tape, Var};
use crate::checkpoint;
use crate::data::{rng_for, Batch};
use crate::diversity::GroupPartition;
use crate::error::{Error, Result};
use crate::losses::{self, LossWeights};
use crate::tensor::kernels;
use crate::tensor::{LayerShape, Tensor};

/// One entry of the base network. Convolutions use "same" zero padding and stride 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Conv { out_channels: usize, kernel: usize },
    Relu,
    AvgPool(usize),
    MaxPool(usize),
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Conv {
                out_channels,
                kernel,
            } => write!(f, "conv{kernel}x{kernel}:{out_channels}"),
            Stage::Relu => f.write_str("relu"),
            Stage::AvgPool(size) => write!(f, "avgpool{size}"),
            Stage::MaxPool(size) => write!(f, "pool{size}"),
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown stage `{s}`"));
        let s = s.trim();
        if s == "relu" {
            return Ok(Stage::Relu);
        }
        for (prefix, make) in [
            ("avgpool", Stage::AvgPool as fn(usize) -> Stage),
            ("maxpool", Stage::MaxPool),
            ("pool", Stage::MaxPool),
        ] {
            if let Some(size) = s.strip_prefix(prefix) {
                let size: usize = size.parse().map_err(|_| bad())?;
                return if size == 0 {
                    Err(bad())
                } else {
                    Ok(make(size))
                };
            }
        }
        let rest = s.strip_prefix("conv").ok_or_else(bad)?;
        let (kernel, channels) = rest.split_once(':').ok_or_else(bad)?;
        let (kh, kw) = kernel.split_once('x').ok_or_else(bad)?;
        if kh != kw {
            return Err(Error::Config(format!(
                "only square kernels are supported: `{s}`"
            )));
        }
        let kernel: usize = kh.parse().map_err(|_| bad())?;
        let out_channels: usize = channels.parse().map_err(|_| bad())?;
        if kernel.is_multiple_of(2) || out_channels == 0 {
            return Err(Error::Config(format!(
                "convolutions need an odd kernel and >= 1 channel: `{s}`"
            )));
        }
        Ok(Stage::Conv {
            out_channels,
            kernel,
        })
    }
}

/// Base CNN: RGB input followed by a list of stages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub in_channels: usize,
    pub stages: Vec<Stage>,
}

impl Architecture {
    /// `conv3x3(16)-relu-pool2 → conv3x3(32)-relu-pool2 → conv3x3(c)-relu`.
    pub fn tiny_net(final_channels: usize) -> Self {
        let conv = |c| Stage::Conv {
            out_channels: c,
            kernel: 3,
        };
        Self {
            in_channels: 3,
            stages: vec![
                conv(16),
                Stage::Relu,
                Stage::MaxPool(2),
                conv(32),
                Stage::Relu,
                Stage::MaxPool(2),
                conv(final_channels),
                Stage::Relu,
            ],
        }
    }

    pub fn conv_layers(&self) -> usize {
        self.stages
            .iter()
            .filter(|s| matches!(s, Stage::Conv { .. }))
            .count()
    }

    pub fn final_channels(&self) -> Option<usize> {
        self.stages.iter().rev().find_map(|s| match s {
            Stage::Conv { out_channels, .. } => Some(*out_channels),
            _ => None,
        })
    }

    /// Output geometry of conv layer `layer_index` (1-based) for an `h x w` input.
    pub fn layer_shape(&self, layer_index: usize, h: usize, w: usize) -> Result<LayerShape> {
        let (mut c, mut h, mut w) = (self.in_channels, h, w);
        let mut k = 0;
        for stage in &self.stages {
            match *stage {
                Stage::Conv { out_channels, .. } => {
                    if k == layer_index {
                        break;
                    }
                    c = out_channels;
                    k += 1;
                }
                Stage::Relu => {}
                Stage::AvgPool(size) | Stage::MaxPool(size) => {
                    if k == layer_index {
                        break;
                    }
                    if h < size || w < size {
                        return Err(Error::Config(format!("pool{size} does not fit {h}x{w}")));
                    }
                    h /= size;
                    w /= size;
                }
            }
        }
        if layer_index == 0 || k != layer_index {
            return Err(Error::InvalidArgument(format!(
                "layer {layer_index} does not exist (network has {} conv layers)",
                self.conv_layers()
            )));
        }
        LayerShape::new(c, h, w, layer_index)
    }

    pub fn final_shape(&self, h: usize, w: usize) -> Result<LayerShape> {
        self.layer_shape(self.conv_layers(), h, w)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.stages.iter().map(Stage::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let stages = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            in_channels: 3,
            stages,
        })
    }
}

/// Which heads are wired during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Both groups, both suppressors, both group classifiers, main over the concat.
    Full,
    /// Background heads removed; the main classifier sees only the foreground group.
    OnlyFg,
    /// Foreground heads removed; the main classifier sees only the background group.
    OnlyBg,
    /// Plain CNN: main classifier over all channels, nothing else.
    Vanilla,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::OnlyFg,
        Variant::OnlyBg,
        Variant::Vanilla,
    ];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "gocnn",
            Variant::OnlyFg => "only_fg",
            Variant::OnlyBg => "only_bg",
            Variant::Vanilla => "vanilla",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gocnn" | "full" => Ok(Variant::Full),
            "only_fg" => Ok(Variant::OnlyFg),
            "only_bg" => Ok(Variant::OnlyBg),
            "vanilla" => Ok(Variant::Vanilla),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classification {
    SingleLabel,
    MultiLabel,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::SingleLabel => "softmax",
            Classification::MultiLabel => "logistic",
        })
    }
}

impl FromStr for Classification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" | "single" => Ok(Classification::SingleLabel),
            "logistic" | "multi" => Ok(Classification::MultiLabel),
            other => Err(Error::Config(format!(
                "unknown classification mode `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoCnnConfig {
    pub architecture: Architecture,
    pub classes: usize,
    /// Foreground : background channel ratio.
    pub group_ratio: (usize, usize),
    pub weights: LossWeights,
    pub classification: Classification,
    pub variant: Variant,
    /// Attach the suppressors. Disabling them leaves every parameter in place.
    pub suppression: bool,
}

impl Default for GoCnnConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::tiny_net(64),
            classes: 8,
            group_ratio: (3, 1),
            weights: LossWeights::default(),
            classification: Classification::SingleLabel,
            variant: Variant::Full,
            suppression: true,
        }
    }
}

impl GoCnnConfig {
    pub fn validate(&self) -> Result<()> {
        let c = self
            .architecture
            .final_channels()
            .ok_or_else(|| Error::Config("architecture has no convolution".into()))?;
        let (a, b) = self.group_ratio;
        if a == 0 || b == 0 {
            return Err(Error::Config(format!(
                "group ratio {a}:{b} needs two non-empty groups"
            )));
        }
        if c % (a + b) != 0 {
            return Err(Error::Config(format!(
                "final layer has {c} channels, not divisible by {} for a {a}:{b} split",
                a + b
            )));
        }
        if self.classes == 0 {
            return Err(Error::Config("classes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn final_channels(&self) -> usize {
        self.architecture.final_channels().unwrap_or(0)
    }

    pub fn fg_channels(&self) -> usize {
        let (a, b) = self.group_ratio;
        self.final_channels() * a / (a + b)
    }

    pub fn partition(&self) -> Result<GroupPartition> {
        GroupPartition::foreground_background(self.final_channels(), self.fg_channels())
    }

    fn main_input(&self) -> (usize, usize) {
        let (c, fg) = (self.final_channels(), self.fg_channels());
        match self.variant {
            Variant::Full | Variant::Vanilla => (0, c),
            Variant::OnlyFg => (0, fg),
            Variant::OnlyBg => (fg, c),
        }
    }
}

/// Loss terms of one training forward pass. Absent heads are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBundle {
    pub main: f64,
    pub fg_cls: Option<f64>,
    pub bg_cls: Option<f64>,
    pub sup_fg: Option<f64>,
    pub sup_bg: Option<f64>,
    pub total: f64,
}

/// A recorded training pass, ready for `backward`.
pub struct TrainPass {
    pub tape: Tape,
    pub total: Var,
    pub losses: LossBundle,
    pub features: Var,
    pub main_logits: Var,
    pub fg_logits: Option<Var>,
    pub bg_logits: Option<Var>,
}

/// Tape-free logits of every head present in the model.
#[derive(Clone, Debug)]
pub struct HeadLogits {
    pub main: Tensor,
    pub fg: Option<Tensor>,
    pub bg: Option<Tensor>,
    pub features: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Affine {
    weight: usize,
    bias: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoCnnModel {
    config: GoCnnConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
    convs: Vec<Affine>,
    main: Affine,
    fg_head: Option<Affine>,
    bg_head: Option<Affine>,
}

fn he_normal(shape: &[usize], fan_in: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Tensor {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    Tensor::from_fn(shape, |_| normal.sample(rng))
}

impl GoCnnModel {
    /// He-initialized model; parameters are a pure function of `(config, seed)`.
    pub fn build(config: GoCnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_for(seed, 0x0060_C111);
        let mut names = Vec::new();
        let mut params = Vec::new();
        let mut add = |name: String, t: Tensor| {
            names.push(name);
            params.push(t);
            params.len() - 1
        };

        let mut convs = Vec::new();
        let mut in_c = config.architecture.in_channels;
        for stage in &config.architecture.stages {
            if let Stage::Conv {
                out_channels,
                kernel,
            } = *stage
            {
                let k = convs.len() + 1;
                let fan_in = in_c * kernel * kernel;
                let w = he_normal(&[out_channels, in_c, kernel, kernel], fan_in, &mut rng);
                let weight = add(format!("conv{k}.weight"), w);
                let bias = add(format!("conv{k}.bias"), Tensor::zeros(&[out_channels]));
                convs.push(Affine { weight, bias });
                in_c = out_channels;
            }
        }

        let classes = config.classes;
        let (start, end) = config.main_input();
        let mut linear = |name: &str, width: usize| {
            let w = he_normal(&[classes, width], width, &mut rng);
            let weight = add(format!("{name}.weight"), w);
            let bias = add(format!("{name}.bias"), Tensor::zeros(&[classes]));
            Affine { weight, bias }
        };
        let main = linear("main", end - start);
        let (fg_head, bg_head) = if config.variant == Variant::Full {
            let fg = config.fg_channels();
            let bg = config.final_channels() - fg;
            (Some(linear("fg_head", fg)), Some(linear("bg_head", bg)))
        } else {
            (None, None)
        };

        Ok(Self {
            config,
            names,
            params,
            convs,
            main,
            fg_head,
            bg_head,
        })
    }

    pub fn config(&self) -> &GoCnnConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn partition(&self) -> GroupPartition {
        self.config.partition().expect("validated at build")
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.param_index(name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.param_index(name).map(move |i| &mut self.params[i])
    }

    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        self.names
            .iter()
            .cloned()
            .zip(self.params.iter().cloned())
            .collect()
    }

    pub fn has_fg_head(&self) -> bool {
        self.fg_head.is_some()
    }

    pub fn has_bg_head(&self) -> bool {
        self.bg_head.is_some()
    }

    /// Scalar count of every trainable parameter, train-time heads included.
    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Parameters of the deployed network: convolutions plus main classifier.
    pub fn test_param_count(&self) -> usize {
        let conv: usize = self
            .convs
            .iter()
            .map(|a| self.params[a.weight].numel() + self.params[a.bias].numel())
            .sum();
        conv + self.params[self.main.weight].numel() + self.params[self.main.bias].numel()
    }

    /// Final-layer feature geometry for `h x w` inputs.
    pub fn feature_shape(&self, h: usize, w: usize) -> Result<LayerShape> {
        self.config.architecture.final_shape(h, w)
    }

    /// Same parameters under a different ablation. Shared tensors are copied
    /// over; a main classifier whose width changes is re-initialized from `seed`.
    pub fn ablation_mode(&self, variant: Variant, seed: u64) -> Result<Self> {
        let config = GoCnnConfig {
            variant,
            ..self.config.clone()
        };
        let mut out = Self::build(config, seed)?;
        for (name, t) in self.names.iter().zip(&self.params) {
            if let Some(dst) = out.param_mut(name) {
                if dst.shape() == t.shape() {
                    *dst = t.clone();
                }
            }
        }
        Ok(out)
    }

    fn conv_stack_tape(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let mut h = x;
        let mut k = 0;
        for stage in &self.config.architecture.stages {
            h = match *stage {
                Stage::Conv { kernel, .. } => {
                    let a = self.convs[k];
                    k += 1;
                    tape.conv2d(h, vars[a.weight], vars[a.bias], 1, kernel / 2)?
                }
                Stage::Relu => tape.relu(h),
                Stage::AvgPool(size) => tape.avg_pool2d(h, size)?,
                Stage::MaxPool(size) => tape.max_pool2d(h, size)?,
            };
        }
        Ok(h)
    }

    /// Runs the base network, returning the output of conv layer `stop_at`
    /// (after its activation) or of the whole stack when `stop_at` is `None`.
    fn conv_stack(&self, images: &Tensor, stop_at: Option<usize>) -> Result<Tensor> {
        let stages = &self.config.architecture.stages;
        let mut h = center(images);
        let mut k = 0;
        for (i, stage) in stages.iter().enumerate() {
            h = match *stage {
                Stage::Conv { kernel, .. } => {
                    let a = self.convs[k];
                    k += 1;
                    kernels::conv2d(
                        &h,
                        &self.params[a.weight],
                        &self.params[a.bias],
                        1,
                        kernel / 2,
                    )?
                }
                Stage::Relu => kernels::relu(&h),
                Stage::AvgPool(size) => kernels::avg_pool2d(&h, size)?,
                Stage::MaxPool(size) => kernels::max_pool2d(&h, size)?.0,
            };
            if Some(k) == stop_at && !matches!(stages.get(i + 1), Some(Stage::Relu)) {
                return Ok(h);
            }
        }
        if let Some(layer) = stop_at {
            if layer != k || layer == 0 {
                return Err(Error::InvalidArgument(format!(
                    "layer {layer} does not exist (network has {k} conv layers)"
                )));
            }
        }
        Ok(h)
    }

    /// Feature maps of conv layer `layer_index` (1-based), after activation.
    pub fn layer_output(&self, images: &Tensor, layer_index: usize) -> Result<Tensor> {
        if layer_index == 0 || layer_index > self.convs.len() {
            return Err(Error::InvalidArgument(format!(
                "layer {layer_index} does not exist (network has {} conv layers)",
                self.convs.len()
            )));
        }
        self.conv_stack(images, Some(layer_index))
    }

    pub fn final_features(&self, images: &Tensor) -> Result<Tensor> {
        self.conv_stack(images, None)
    }

    fn head_loss(&self, tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
        match self.config.classification {
            Classification::SingleLabel => tape.softmax_cross_entropy(logits, labels),
            Classification::MultiLabel => {
                let targets = losses::one_hot(labels, self.config.classes)?;
                tape.multilabel_logistic(logits, targets)
            }
        }
    }

    /// Records the training graph for `batch`: suppressors on the gated group
    /// features, group classifiers on pooled groups and the main classifier on
    /// the unmasked pooled features.
    pub fn forward_train(&self, batch: &Batch) -> Result<TrainPass> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| tape.param(i, p.clone()))
            .collect();
        let x = tape.constant(center(&batch.images));
        let features = self.conv_stack_tape(&mut tape, &vars, x)?;

        let c = self.config.final_channels();
        let fg = self.config.fg_channels();
        let variant = self.config.variant;
        let w = self.config.weights;
        let uses_fg = matches!(variant, Variant::Full | Variant::OnlyFg);
        let uses_bg = matches!(variant, Variant::Full | Variant::OnlyBg);

        let mut bundle = LossBundle::default();
        let mut terms: Vec<(f64, Var)> = Vec::new();

        let (main_logits, fg_logits, bg_logits) = if variant == Variant::Vanilla {
            let pooled = tape.global_avg_pool(features)?;
            let logits = tape.linear(pooled, vars[self.main.weight], vars[self.main.bias])?;
            (logits, None, None)
        } else {
            let fg_maps = tape.slice_channels(features, 0, fg)?;
            let bg_maps = tape.slice_channels(features, fg, c)?;
            let shape = tape.value(features).shape().to_vec();
            if shape[2..] != [batch.masks[0].fg.height(), batch.masks[0].fg.width()] {
                return Err(Error::Shape(format!(
                    "masks are {}x{} but final feature maps are {}x{}",
                    batch.masks[0].fg.height(),
                    batch.masks[0].fg.width(),
                    shape[2],
                    shape[3]
                )));
            }

            if self.config.suppression {
                if uses_fg {
                    let gate = losses::stack_masks(batch.masks.iter().map(|m| &m.bg))?;
                    let gated = tape.gate(fg_maps, gate)?;
                    let sup = tape.mean_square(gated);
                    bundle.sup_fg = Some(tape.value(sup).item()?);
                    terms.push((w.suppression, sup));
                }
                if uses_bg {
                    let gate = losses::stack_masks(batch.masks.iter().map(|m| &m.fg))?;
                    let gated = tape.gate(bg_maps, gate)?;
                    let sup = tape.mean_square(gated);
                    bundle.sup_bg = Some(tape.value(sup).item()?);
                    terms.push((w.suppression, sup));
                }
            }

            let pooled_fg = tape.global_avg_pool(fg_maps)?;
            let pooled_bg = tape.global_avg_pool(bg_maps)?;
            let main_in = match variant {
                Variant::Full => tape.concat(&[pooled_fg, pooled_bg])?,
                Variant::OnlyFg => pooled_fg,
                Variant::OnlyBg => pooled_bg,
                Variant::Vanilla => unreachable!(),
            };
            let main_logits = tape.linear(main_in, vars[self.main.weight], vars[self.main.bias])?;
            let fg_logits = match self.fg_head {
                Some(a) => Some(tape.linear(pooled_fg, vars[a.weight], vars[a.bias])?),
                None => None,
            };
            let bg_logits = match self.bg_head {
                Some(a) => Some(tape.linear(pooled_bg, vars[a.weight], vars[a.bias])?),
                None => None,
            };
            (main_logits, fg_logits, bg_logits)
        };

        let main_loss = self.head_loss(&mut tape, main_logits, &batch.labels)?;
        bundle.main = tape.value(main_loss).item()?;
        let mut head_terms = vec![(w.main, main_loss)];
        if let Some(logits) = fg_logits {
            let l = self.head_loss(&mut tape, logits, &batch.labels)?;
            bundle.fg_cls = Some(tape.value(l).item()?);
            head_terms.push((w.fg, l));
        } else if variant == Variant::OnlyFg {
            // The foreground classifier is the main classifier here.
            bundle.fg_cls = Some(bundle.main);
        }
        if let Some(logits) = bg_logits {
            let l = self.head_loss(&mut tape, logits, &batch.labels)?;
            bundle.bg_cls = Some(tape.value(l).item()?);
            head_terms.push((w.bg, l));
        } else if variant == Variant::OnlyBg {
            bundle.bg_cls = Some(bundle.main);
        }
        head_terms.extend(terms);
        let terms = head_terms;

        let total = tape.weighted_sum(&terms)?;
        bundle.total = tape.value(total).item()?;
        Ok(TrainPass {
            tape,
            total,
            losses: bundle,
            features,
            main_logits,
            fg_logits,
            bg_logits,
        })
    }

    /// Loss terms and per-parameter gradients of the total loss.
    pub fn loss_and_grads(&self, batch: &Batch) -> Result<(LossBundle, Vec<Tensor>, TrainPass)> {
        let pass = self.forward_train(batch)?;
        let grads = pass.tape.backward(pass.total)?;
        let grads = grads.param_grads(&pass.tape, self.params.len());
        Ok((pass.losses, grads, pass))
    }

    /// Deployed network: pooled final features through the main classifier.
    pub fn forward_test(&self, images: &Tensor) -> Result<Tensor> {
        let features = self.final_features(images)?;
        self.main_from_features(&features)
    }

    fn main_from_features(&self, features: &Tensor) -> Result<Tensor> {
        let pooled = kernels::global_avg_pool(features)?;
        let (start, end) = self.config.main_input();
        let pooled = if (start, end) == (0, self.config.final_channels()) {
            pooled
        } else {
            slice_columns(&pooled, start, end)?
        };
        kernels::fully_connected(
            &pooled,
            &self.params[self.main.weight],
            &self.params[self.main.bias],
        )
    }

    /// Logits of the main head and of whichever group heads exist.
    pub fn head_logits(&self, images: &Tensor) -> Result<HeadLogits> {
        let features = self.final_features(images)?;
        let main = self.main_from_features(&features)?;
        let pooled = kernels::global_avg_pool(&features)?;
        let (c, fg) = (self.config.final_channels(), self.config.fg_channels());
        let head = |a: Option<Affine>, start: usize, end: usize| -> Result<Option<Tensor>> {
            a.map(|a| {
                let p = slice_columns(&pooled, start, end)?;
                kernels::fully_connected(&p, &self.params[a.weight], &self.params[a.bias])
            })
            .transpose()
        };
        Ok(HeadLogits {
            main,
            fg: head(self.fg_head, 0, fg)?,
            bg: head(self.bg_head, fg, c)?,
            features,
        })
    }

    pub fn manifest(&self, seed: u64) -> ModelManifest {
        ModelManifest {
            config: self.config.clone(),
            seed,
        }
    }

    /// Writes the checkpoint and its `.manifest` sidecar.
    pub fn save(&self, path: impl AsRef<Path>, seed: u64) -> Result<()> {
        let path = path.as_ref();
        checkpoint::save(path, &self.named_params())?;
        std::fs::write(manifest_path(path), self.manifest(seed).to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, ModelManifest)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(manifest_path(path))?;
        let manifest = ModelManifest::parse(&text)?;
        let tensors = checkpoint::load(path)?;
        let model = Self::from_tensors(manifest.config.clone(), tensors)?;
        Ok((model, manifest))
    }

    /// Model with the given config whose parameters come from `tensors`.
    pub fn from_tensors(config: GoCnnConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        let mut model = Self::build(config, 0)?;
        if tensors.len() != model.params.len() {
            return Err(Error::Data(format!(
                "checkpoint has {} tensors, model expects {}",
                tensors.len(),
                model.params.len()
            )));
        }
        for (name, t) in tensors {
            let slot = model
                .param_mut(&name)
                .ok_or_else(|| Error::Data(format!("unexpected tensor `{name}` in checkpoint")))?;
            if slot.shape() != t.shape() {
                return Err(Error::Data(format!(
                    "tensor `{name}` has shape {:?}, model expects {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }
        Ok(model)
    }
}

/// Pixels in [0,1] are shifted to [-0.5,0.5] before the first convolution.
fn center(images: &Tensor) -> Tensor {
    images.map(|v| v - 0.5)
}

fn slice_columns(t: &Tensor, start: usize, end: usize) -> Result<Tensor> {
    let (rows, cols) = (t.dim(0), t.dim(1));
    let data = t
        .data()
        .chunks(cols)
        .flat_map(|r| r[start..end].iter().copied())
        .collect();
    Tensor::new(&[rows, end - start], data)
}

pub fn manifest_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

/// Plain-text sidecar describing how to rebuild a checkpointed model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelManifest {
    pub config: GoCnnConfig,
    pub seed: u64,
}

impl ModelManifest {
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let fg = c.fg_channels();
        let w = c.weights;
        [
            format!("architecture = {}", c.architecture),
            format!("classes = {}", c.classes),
            format!("mode = {}", c.variant),
            format!("classification = {}", c.classification),
            format!("group_ratio = {}:{}", c.group_ratio.0, c.group_ratio.1),
            format!("fg_channels = 0..{fg}"),
            format!("bg_channels = {fg}..{}", c.final_channels()),
            format!("suppression = {}", c.suppression),
            format!("w_main = {}", w.main),
            format!("w_fg = {}", w.fg),
            format!("w_bg = {}", w.bg),
            format!("w_sup = {}", w.suppression),
            format!("seed = {}", self.seed),
        ]
        .join("\n")
            + "\n"
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = GoCnnConfig::default();
        let mut seed = 0;
        for (key, value) in parse_key_values(text)? {
            let bad = |e: &dyn fmt::Display| Error::Data(format!("manifest `{key}`: {e}"));
            match key.as_str() {
                "architecture" => config.architecture = value.parse()?,
                "classes" => config.classes = value.parse().map_err(|e| bad(&e))?,
                "mode" => config.variant = value.parse()?,
                "classification" => config.classification = value.parse()?,
                "group_ratio" => {
                    let (a, b) = value.split_once(':').ok_or_else(|| bad(&"expected a:b"))?;
                    config.group_ratio = (
                        a.trim().parse().map_err(|e| bad(&e))?,
                        b.trim().parse().map_err(|e| bad(&e))?,
                    );
                }
                "suppression" => config.suppression = value.parse().map_err(|e| bad(&e))?,
                "w_main" => config.weights.main = value.parse().map_err(|e| bad(&e))?,
                "w_fg" => config.weights.fg = value.parse().map_err(|e| bad(&e))?,
                "w_bg" => config.weights.bg = value.parse().map_err(|e| bad(&e))?,
                "w_sup" => config.weights.suppression = value.parse().map_err(|e| bad(&e))?,
                "seed" => seed = value.parse().map_err(|e| bad(&e))?,
                "fg_channels" | "bg_channels" => {}
                other => return Err(Error::Data(format!("unknown manifest key `{other}`"))),
            }
        }
        config.validate()?;
        Ok(Self { config, seed })
    }
}

/// `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
