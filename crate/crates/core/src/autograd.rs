//! Reverse-mode differentiation over a recorded tape of layer operations.
//!
//! Nodes are appended in execution order, so the tape is always topologically
//! sorted and `backward` is a single reverse sweep.

use crate::error::{shape_err, Error, Result};
use crate::losses;
use crate::tensor::kernels;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Param,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        pad: usize,
    },
    Relu(Var),
    MaxPool2d {
        input: Var,
        argmax: Vec<usize>,
    },
    AvgPool2d {
        input: Var,
        size: usize,
    },
    GlobalAvgPool(Var),
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
    },
    SliceChannels {
        input: Var,
        start: usize,
    },
    Concat(Vec<Var>),
    Gate {
        input: Var,
        gate: Tensor,
    },
    MeanSquare(Var),
    Sum(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Tensor,
    },
    Logistic {
        logits: Var,
        targets: Tensor,
    },
    WeightedSum(Vec<(f64, Var)>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(usize, Var)>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A leaf that never receives a gradient (images, labels, masks).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// A trainable leaf identified by its index in the parameter store.
    pub fn param(&mut self, index: usize, value: Tensor) -> Var {
        let var = self.push(value, Op::Param, true);
        self.params.push((index, var));
        var
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let out = kernels::conv2d(
            self.value(input),
            self.value(weight),
            self.value(bias),
            stride,
            pad,
        )?;
        let rg = self.needs(&[input, weight, bias]);
        Ok(self.push(
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                pad,
            },
            rg,
        ))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let out = kernels::relu(self.value(input));
        let rg = self.needs(&[input]);
        self.push(out, Op::Relu(input), rg)
    }

    pub fn avg_pool2d(&mut self, input: Var, size: usize) -> Result<Var> {
        let out = kernels::avg_pool2d(self.value(input), size)?;
        let rg = self.needs(&[input]);
        Ok(self.push(out, Op::AvgPool2d { input, size }, rg))
    }

    pub fn max_pool2d(&mut self, input: Var, size: usize) -> Result<Var> {
        let (out, argmax) = kernels::max_pool2d(self.value(input), size)?;
        let rg = self.needs(&[input]);
        Ok(self.push(out, Op::MaxPool2d { input, argmax }, rg))
    }

    pub fn global_avg_pool(&mut self, input: Var) -> Result<Var> {
        let out = kernels::global_avg_pool(self.value(input))?;
        let rg = self.needs(&[input]);
        Ok(self.push(out, Op::GlobalAvgPool(input), rg))
    }

    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let out =
            kernels::fully_connected(self.value(input), self.value(weight), self.value(bias))?;
        let rg = self.needs(&[input, weight, bias]);
        Ok(self.push(
            out,
            Op::Linear {
                input,
                weight,
                bias,
            },
            rg,
        ))
    }

    /// Channels `[start, end)` along axis 1 of a rank-2 or rank-4 tensor.
    pub fn slice_channels(&mut self, input: Var, start: usize, end: usize) -> Result<Var> {
        let src = self.value(input);
        let shape = src.shape().to_vec();
        if shape.len() < 2 || start >= end || end > shape[1] {
            return Err(shape_err!(
                "cannot slice channels {start}..{end} of {shape:?}"
            ));
        }
        let inner: usize = shape[2..].iter().product();
        let mut out_shape = shape.clone();
        out_shape[1] = end - start;
        let mut data = Vec::with_capacity(shape[0] * (end - start) * inner);
        for b in 0..shape[0] {
            let base = b * shape[1] * inner;
            data.extend_from_slice(&src.data()[base + start * inner..base + end * inner]);
        }
        let out = Tensor::new(&out_shape, data)?;
        let rg = self.needs(&[input]);
        Ok(self.push(out, Op::SliceChannels { input, start }, rg))
    }

    /// Concatenation of `[B,D_i]` tensors along axis 1.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let batch = self.value(*first).dim(0);
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let v = self.value(p);
            if v.rank() != 2 || v.dim(0) != batch {
                return Err(shape_err!(
                    "concat expects [{batch},D] tensors, got {:?}",
                    v.shape()
                ));
            }
            widths.push(v.dim(1));
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(batch * total);
        for b in 0..batch {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[b * w..(b + 1) * w]);
            }
        }
        let out = Tensor::new(&[batch, total], data)?;
        let rg = self.needs(parts);
        Ok(self.push(out, Op::Concat(parts.to_vec()), rg))
    }

    /// Multiplies each sample's feature planes by a constant `[B,h,w]` gate.
    /// No gradient flows into the gate.
    pub fn gate(&mut self, input: Var, gate: Tensor) -> Result<Var> {
        let out = losses::gate_features(self.value(input), &gate)?;
        let rg = self.needs(&[input]);
        Ok(self.push(out, Op::Gate { input, gate }, rg))
    }

    pub fn mean_square(&mut self, input: Var) -> Var {
        let out = Tensor::scalar(losses::mean_square(self.value(input)));
        let rg = self.needs(&[input]);
        self.push(out, Op::MeanSquare(input), rg)
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let out = Tensor::scalar(self.value(input).sum());
        let rg = self.needs(&[input]);
        self.push(out, Op::Sum(input), rg)
    }

    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (loss, probs) = losses::softmax_cross_entropy(self.value(logits), labels)?;
        let rg = self.needs(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    pub fn multilabel_logistic(&mut self, logits: Var, targets: Tensor) -> Result<Var> {
        let loss = losses::multilabel_logistic_loss(self.value(logits), &targets)?;
        let rg = self.needs(&[logits]);
        Ok(self.push(Tensor::scalar(loss), Op::Logistic { logits, targets }, rg))
    }

    /// `Σ w_i · x_i` over same-shaped terms.
    pub fn weighted_sum(&mut self, terms: &[(f64, Var)]) -> Result<Var> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("weighted_sum of zero terms".into()))?;
        let mut acc = Tensor::zeros(self.value(*first).shape());
        for &(w, v) in terms {
            acc.add_scaled(self.value(v), w)?;
        }
        let vars: Vec<Var> = terms.iter().map(|t| t.1).collect();
        let rg = self.needs(&vars);
        Ok(self.push(acc, Op::WeightedSum(terms.to_vec()), rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let seed = self.value(loss);
        if seed.numel() != 1 {
            return Err(shape_err!(
                "backward needs a scalar loss, got {:?}",
                seed.shape()
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::ones(seed.shape()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        Ok(Gradients {
            grads,
            params: self.params.clone(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], var: Var, g: Tensor) -> Result<()> {
        if !self.nodes[var.0].requires_grad {
            return Ok(());
        }
        match &mut grads[var.0] {
            Some(acc) => acc.add_scaled(&g, 1.0)?,
            slot @ None => *slot = Some(g),
        }
        Ok(())
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        match &node.op {
            Op::Constant | Op::Param => {}
            &Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                pad,
            } => {
                let want_input = self.nodes[input.0].requires_grad;
                let cg = kernels::conv2d_backward(
                    self.value(input),
                    self.value(weight),
                    g,
                    stride,
                    pad,
                    want_input,
                )?;
                if let Some(di) = cg.input {
                    self.accumulate(grads, input, di)?;
                }
                self.accumulate(grads, weight, cg.weight)?;
                self.accumulate(grads, bias, cg.bias)?;
            }
            &Op::Relu(input) => {
                let d = kernels::relu_backward(self.value(input), g)?;
                self.accumulate(grads, input, d)?;
            }
            &Op::AvgPool2d { input, size } => {
                let d = kernels::avg_pool2d_backward(self.value(input).shape(), g, size)?;
                self.accumulate(grads, input, d)?;
            }
            Op::MaxPool2d { input, argmax } => {
                let d = kernels::max_pool2d_backward(self.value(*input).shape(), g, argmax)?;
                self.accumulate(grads, *input, d)?;
            }
            &Op::GlobalAvgPool(input) => {
                let d = kernels::global_avg_pool_backward(self.value(input).shape(), g)?;
                self.accumulate(grads, input, d)?;
            }
            &Op::Linear {
                input,
                weight,
                bias,
            } => {
                let lg =
                    kernels::fully_connected_backward(self.value(input), self.value(weight), g)?;
                self.accumulate(grads, input, lg.input)?;
                self.accumulate(grads, weight, lg.weight)?;
                self.accumulate(grads, bias, lg.bias)?;
            }
            &Op::SliceChannels { input, start } => {
                let full = self.value(input).shape();
                let inner: usize = full[2..].iter().product();
                let width = g.dim(1);
                let mut d = Tensor::zeros(full);
                for b in 0..full[0] {
                    let dst = b * full[1] * inner + start * inner;
                    let src = b * width * inner;
                    d.data_mut()[dst..dst + width * inner]
                        .copy_from_slice(&g.data()[src..src + width * inner]);
                }
                self.accumulate(grads, input, d)?;
            }
            Op::Concat(parts) => {
                let (batch, total) = (g.dim(0), g.dim(1));
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).dim(1);
                    let mut d = Vec::with_capacity(batch * w);
                    for b in 0..batch {
                        d.extend_from_slice(&g.data()[b * total + offset..b * total + offset + w]);
                    }
                    offset += w;
                    self.accumulate(grads, p, Tensor::new(&[batch, w], d)?)?;
                }
            }
            Op::Gate { input, gate } => {
                let d = losses::gate_features(g, gate)?;
                self.accumulate(grads, *input, d)?;
            }
            &Op::MeanSquare(input) => {
                let x = self.value(input);
                let scale = 2.0 * g.item()? / x.numel() as f64;
                self.accumulate(grads, input, x.map(|v| scale * v))?;
            }
            &Op::Sum(input) => {
                let s = g.item()?;
                self.accumulate(grads, input, Tensor::full(self.value(input).shape(), s))?;
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let s = g.item()?;
                let d = losses::softmax_cross_entropy_grad(probs, labels).map(|v| s * v);
                self.accumulate(grads, *logits, d)?;
            }
            Op::Logistic { logits, targets } => {
                let s = g.item()?;
                let d =
                    losses::multilabel_logistic_grad(self.value(*logits), targets).map(|v| s * v);
                self.accumulate(grads, *logits, d)?;
            }
            Op::WeightedSum(terms) => {
                for &(w, v) in terms {
                    self.accumulate(grads, v, g.map(|x| w * x))?;
                }
            }
        }
        Ok(())
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(usize, Var)>,
}

impl Gradients {
    /// Gradient w.r.t. any recorded value; `None` when no path reaches it.
    pub fn wrt(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Per-parameter gradients indexed like the parameter store; parameters the
    /// loss does not depend on get zeros of the right shape.
    pub fn param_grads(&self, tape: &Tape, count: usize) -> Vec<Tensor> {
        let mut out: Vec<Option<Tensor>> = vec![None; count];
        for &(index, var) in &self.params {
            if index < count {
                out[index] = Some(
                    self.wrt(var)
                        .cloned()
                        .unwrap_or_else(|| Tensor::zeros(tape.value(var).shape())),
                );
            }
        }
        out.into_iter()
            .map(|g| g.unwrap_or_else(|| Tensor::zeros(&[0])))
            .collect()
    }
}
