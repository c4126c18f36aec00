//! Forward and backward kernels for the fixed layer vocabulary.
//!
//! Convolution is cross-correlation (no kernel flip) with zero padding, lowered
//! to one GEMM per batch item through an im2col buffer.

use super::Tensor;
use crate::error::{shape_err, Error, Result};

/// `c = a * b + beta * c` for row/column-strided matrices `a: m x k`, `b: k x n`, `c: m x n`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    assert!(
        k == 0 || last(m, k, rsa, csa) < a.len(),
        "gemm: lhs out of bounds"
    );
    assert!(
        k == 0 || last(k, n, rsb, csb) < b.len(),
        "gemm: rhs out of bounds"
    );
    assert!(last(m, n, rsc, csc) < c.len(), "gemm: output out of bounds");
    // SAFETY: every index touched by dgemm is bounded by the asserts above and
    // the three slices are distinct borrows.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Resolved dimensions of one convolution call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn infer(input: &[usize], weight: &[usize], stride: usize, pad: usize) -> Result<Self> {
        let [batch, in_channels, in_h, in_w] = *input else {
            return Err(shape_err!("conv2d input must be rank 4, got {input:?}"));
        };
        let [out_channels, w_in, kernel_h, kernel_w] = *weight else {
            return Err(shape_err!("conv2d weight must be rank 4, got {weight:?}"));
        };
        if w_in != in_channels {
            return Err(shape_err!(
                "conv2d input has {in_channels} channels (shape {input:?}) but weight expects {w_in} (shape {weight:?})"
            ));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv2d stride must be >= 1".into()));
        }
        if kernel_h == 0 || kernel_w == 0 {
            return Err(shape_err!("conv2d kernel has a zero dimension: {weight:?}"));
        }
        if kernel_h > in_h + 2 * pad || kernel_w > in_w + 2 * pad {
            return Err(shape_err!(
                "conv2d kernel {kernel_h}x{kernel_w} exceeds padded input {}x{}",
                in_h + 2 * pad,
                in_w + 2 * pad
            ));
        }
        Ok(Self {
            batch,
            in_channels,
            in_h,
            in_w,
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            pad,
            out_h: (in_h + 2 * pad - kernel_h) / stride + 1,
            out_w: (in_w + 2 * pad - kernel_w) / stride + 1,
        })
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    fn in_sample(&self) -> usize {
        self.in_channels * self.in_h * self.in_w
    }

    fn out_sample(&self) -> usize {
        self.out_channels * self.out_plane()
    }

    /// Calls `f(col_row, col_col, input_offset)` for every in-bounds tap.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        for ci in 0..self.in_channels {
            for ky in 0..self.kernel_h {
                for kx in 0..self.kernel_w {
                    let row = (ci * self.kernel_h + ky) * self.kernel_w + kx;
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.in_h as isize {
                            continue;
                        }
                        for ox in 0..self.out_w {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= self.in_w as isize {
                                continue;
                            }
                            let offset = (ci * self.in_h + iy as usize) * self.in_w + ix as usize;
                            f(row, oy * self.out_w + ox, offset);
                        }
                    }
                }
            }
        }
    }

    fn im2col(&self, sample: &[f64], cols: &mut [f64]) {
        let plane = self.out_plane();
        cols.fill(0.0);
        self.for_each_tap(|row, col, offset| cols[row * plane + col] = sample[offset]);
    }

    fn col2im(&self, cols: &[f64], sample_grad: &mut [f64]) {
        let plane = self.out_plane();
        self.for_each_tap(|row, col, offset| sample_grad[offset] += cols[row * plane + col]);
    }
}

pub fn conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let geo = ConvGeometry::infer(input.shape(), weight.shape(), stride, pad)?;
    if bias.shape() != [geo.out_channels] {
        return Err(shape_err!(
            "conv2d bias must be [{}], got {:?}",
            geo.out_channels,
            bias.shape()
        ));
    }
    let (patch, plane) = (geo.patch_len(), geo.out_plane());
    let mut out = vec![0.0; geo.batch * geo.out_sample()];
    let mut cols = vec![0.0; patch * plane];
    for (b, out_b) in out.chunks_mut(geo.out_sample()).enumerate() {
        let sample = &input.data()[b * geo.in_sample()..(b + 1) * geo.in_sample()];
        geo.im2col(sample, &mut cols);
        gemm(
            geo.out_channels,
            patch,
            plane,
            weight.data(),
            (patch, 1),
            &cols,
            (plane, 1),
            0.0,
            out_b,
            (plane, 1),
        );
        for (oc, row) in out_b.chunks_mut(plane).enumerate() {
            let bias = bias.data()[oc];
            row.iter_mut().for_each(|v| *v += bias);
        }
    }
    Tensor::new(&[geo.batch, geo.out_channels, geo.out_h, geo.out_w], out)
}

pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Gradients of `conv2d` given the upstream gradient. The input gradient is
/// skipped when `want_input` is false.
pub fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    pad: usize,
    want_input: bool,
) -> Result<ConvGrads> {
    let geo = ConvGeometry::infer(input.shape(), weight.shape(), stride, pad)?;
    let out_shape = [geo.batch, geo.out_channels, geo.out_h, geo.out_w];
    if grad_out.shape() != out_shape {
        return Err(shape_err!(
            "conv2d upstream gradient {:?}, expected {out_shape:?}",
            grad_out.shape()
        ));
    }
    let (patch, plane) = (geo.patch_len(), geo.out_plane());
    let mut d_weight = vec![0.0; weight.numel()];
    let mut d_bias = vec![0.0; geo.out_channels];
    let mut d_input = want_input.then(|| vec![0.0; input.numel()]);
    let mut cols = vec![0.0; patch * plane];
    let mut d_cols = vec![0.0; patch * plane];

    for b in 0..geo.batch {
        let sample = &input.data()[b * geo.in_sample()..(b + 1) * geo.in_sample()];
        let g = &grad_out.data()[b * geo.out_sample()..(b + 1) * geo.out_sample()];
        for (oc, row) in g.chunks(plane).enumerate() {
            d_bias[oc] += row.iter().sum::<f64>();
        }
        geo.im2col(sample, &mut cols);
        // dW += g (Cout x plane) * cols^T (plane x patch)
        gemm(
            geo.out_channels,
            plane,
            patch,
            g,
            (plane, 1),
            &cols,
            (1, plane),
            1.0,
            &mut d_weight,
            (patch, 1),
        );
        if let Some(d_input) = d_input.as_mut() {
            // dcols = W^T (patch x Cout) * g (Cout x plane)
            gemm(
                patch,
                geo.out_channels,
                plane,
                weight.data(),
                (1, patch),
                g,
                (plane, 1),
                0.0,
                &mut d_cols,
                (plane, 1),
            );
            let dst = &mut d_input[b * geo.in_sample()..(b + 1) * geo.in_sample()];
            geo.col2im(&d_cols, dst);
        }
    }

    Ok(ConvGrads {
        input: d_input.map(|d| Tensor::new(input.shape(), d)).transpose()?,
        weight: Tensor::new(weight.shape(), d_weight)?,
        bias: Tensor::new(&[geo.out_channels], d_bias)?,
    })
}

fn rank4(t: &Tensor, op: &str) -> Result<[usize; 4]> {
    match *t.shape() {
        [a, b, c, d] => Ok([a, b, c, d]),
        _ => Err(shape_err!(
            "{op} expects a rank-4 tensor, got {:?}",
            t.shape()
        )),
    }
}

/// Non-overlapping `size x size` average pooling with floor semantics.
pub fn avg_pool2d(input: &Tensor, size: usize) -> Result<Tensor> {
    let [b, c, h, w] = rank4(input, "avg_pool2d")?;
    if size == 0 || h < size || w < size {
        return Err(shape_err!("avg_pool2d window {size} does not fit {h}x{w}"));
    }
    let (oh, ow) = (h / size, w / size);
    let scale = 1.0 / (size * size) as f64;
    let src = input.data();
    let mut out = vec![0.0; b * c * oh * ow];
    for (plane, dst) in out.chunks_mut(oh * ow).enumerate() {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for dy in 0..size {
                    let row = base + (oy * size + dy) * w + ox * size;
                    acc += src[row..row + size].iter().sum::<f64>();
                }
                dst[oy * ow + ox] = acc * scale;
            }
        }
    }
    Tensor::new(&[b, c, oh, ow], out)
}

pub fn avg_pool2d_backward(
    input_shape: &[usize],
    grad_out: &Tensor,
    size: usize,
) -> Result<Tensor> {
    let [b, c, h, w] = *input_shape else {
        return Err(shape_err!("avg_pool2d input shape {input_shape:?}"));
    };
    let (oh, ow) = (h / size, w / size);
    if grad_out.shape() != [b, c, oh, ow] {
        return Err(shape_err!(
            "avg_pool2d upstream gradient {:?}",
            grad_out.shape()
        ));
    }
    let scale = 1.0 / (size * size) as f64;
    let mut d = vec![0.0; b * c * h * w];
    for (plane, g) in grad_out.data().chunks(oh * ow).enumerate() {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let v = g[oy * ow + ox] * scale;
                for dy in 0..size {
                    let row = base + (oy * size + dy) * w + ox * size;
                    d[row..row + size].iter_mut().for_each(|x| *x = v);
                }
            }
        }
    }
    Tensor::new(input_shape, d)
}

/// Non-overlapping `size x size` max pooling with floor semantics. Also
/// returns, per output, the flat input index of the (first) maximum.
pub fn max_pool2d(input: &Tensor, size: usize) -> Result<(Tensor, Vec<usize>)> {
    let [b, c, h, w] = rank4(input, "max_pool2d")?;
    if size == 0 || h < size || w < size {
        return Err(shape_err!("max_pool2d window {size} does not fit {h}x{w}"));
    }
    let (oh, ow) = (h / size, w / size);
    let src = input.data();
    let mut out = vec![0.0; b * c * oh * ow];
    let mut arg = vec![0; out.len()];
    for plane in 0..b * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * size * w + ox * size;
                for dy in 0..size {
                    let row = base + (oy * size + dy) * w + ox * size;
                    for i in row..row + size {
                        if src[i] > src[best] {
                            best = i;
                        }
                    }
                }
                let o = (plane * oh + oy) * ow + ox;
                out[o] = src[best];
                arg[o] = best;
            }
        }
    }
    Ok((Tensor::new(&[b, c, oh, ow], out)?, arg))
}

/// Routes each upstream gradient to the input position that won the max.
pub fn max_pool2d_backward(
    input_shape: &[usize],
    grad_out: &Tensor,
    argmax: &[usize],
) -> Result<Tensor> {
    if grad_out.numel() != argmax.len() {
        return Err(shape_err!(
            "max_pool2d upstream gradient {:?} for {} pooled outputs",
            grad_out.shape(),
            argmax.len()
        ));
    }
    let mut d = Tensor::zeros(input_shape);
    let dst = d.data_mut();
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        dst[i] += g;
    }
    Ok(d)
}

/// Mean over the spatial positions of each channel: `[B,C,H,W] -> [B,C]`.
pub fn global_avg_pool(input: &Tensor) -> Result<Tensor> {
    let [b, c, h, w] = rank4(input, "global_avg_pool")?;
    let n = (h * w) as f64;
    let out = input
        .data()
        .chunks(h * w)
        .map(|plane| plane.iter().sum::<f64>() / n)
        .collect();
    Tensor::new(&[b, c], out)
}

pub fn global_avg_pool_backward(input_shape: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    let [b, c, h, w] = *input_shape else {
        return Err(shape_err!("global_avg_pool input shape {input_shape:?}"));
    };
    if grad_out.shape() != [b, c] {
        return Err(shape_err!(
            "global_avg_pool upstream gradient {:?}",
            grad_out.shape()
        ));
    }
    let n = (h * w) as f64;
    let mut d = Vec::with_capacity(b * c * h * w);
    for &g in grad_out.data() {
        d.extend(std::iter::repeat_n(g / n, h * w));
    }
    Tensor::new(input_shape, d)
}

/// Affine map `x W^T + b` for `x: [B,D]`, `W: [K,D]`, `b: [K]`.
pub fn fully_connected(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (&[batch, d], &[k, wd]) = (input.shape(), weight.shape()) else {
        return Err(shape_err!(
            "fully_connected expects [B,D] and [K,D], got {:?} and {:?}",
            input.shape(),
            weight.shape()
        ));
    };
    if d != wd || bias.shape() != [k] {
        return Err(shape_err!(
            "fully_connected: input {:?}, weight {:?}, bias {:?}",
            input.shape(),
            weight.shape(),
            bias.shape()
        ));
    }
    let mut out = Vec::with_capacity(batch * k);
    for _ in 0..batch {
        out.extend_from_slice(bias.data());
    }
    gemm(
        batch,
        d,
        k,
        input.data(),
        (d, 1),
        weight.data(),
        (1, d),
        1.0,
        &mut out,
        (k, 1),
    );
    Tensor::new(&[batch, k], out)
}

pub struct LinearGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn fully_connected_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
) -> Result<LinearGrads> {
    let (batch, d) = (input.dim(0), input.dim(1));
    let k = weight.dim(0);
    if grad_out.shape() != [batch, k] {
        return Err(shape_err!(
            "fully_connected upstream gradient {:?}",
            grad_out.shape()
        ));
    }
    let g = grad_out.data();
    let mut d_input = vec![0.0; batch * d];
    gemm(
        batch,
        k,
        d,
        g,
        (k, 1),
        weight.data(),
        (d, 1),
        0.0,
        &mut d_input,
        (d, 1),
    );
    let mut d_weight = vec![0.0; k * d];
    gemm(
        k,
        batch,
        d,
        g,
        (1, k),
        input.data(),
        (d, 1),
        0.0,
        &mut d_weight,
        (d, 1),
    );
    let mut d_bias = vec![0.0; k];
    for row in g.chunks(k) {
        d_bias.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    Ok(LinearGrads {
        input: Tensor::new(input.shape(), d_input)?,
        weight: Tensor::new(weight.shape(), d_weight)?,
        bias: Tensor::new(&[k], d_bias)?,
    })
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Upstream gradient gated by `x > 0`; the subgradient at 0 is 0.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    input.check_same_shape(grad_out)?;
    let d = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.shape(), d)
}
