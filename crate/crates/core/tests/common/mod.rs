//! Brute-force references shared by the oracle and acceptance targets.

use gocnn::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

pub fn naive_conv(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Tensor {
    let [n, c, h, wd] = x.shape().try_into().unwrap();
    let [o, _, kh, kw] = w.shape().try_into().unwrap();
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; n * o * oh * ow];
    for ni in 0..n {
        for oi in 0..o {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut acc = b.data()[oi];
                    for ci in 0..c {
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let iy = (y * stride + dy) as isize - pad as isize;
                                let ix = (xx * stride + dx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                let xi = ((ni * c + ci) * h + iy as usize) * wd + ix as usize;
                                let wi = ((oi * c + ci) * kh + dy) * kw + dx;
                                acc += x.data()[xi] * w.data()[wi];
                            }
                        }
                    }
                    out[((ni * o + oi) * oh + y) * ow + xx] = acc;
                }
            }
        }
    }
    Tensor::new(&[n, o, oh, ow], out).unwrap()
}

pub fn naive_pool(x: &Tensor, s: usize) -> Tensor {
    let [n, c, h, w] = x.shape().try_into().unwrap();
    let (oh, ow) = (h / s, w / s);
    let mut out = vec![0.0; n * c * oh * ow];
    for p in 0..n * c {
        for y in 0..oh {
            for xx in 0..ow {
                let mut acc = 0.0;
                for dy in 0..s {
                    for dx in 0..s {
                        acc += x.data()[(p * h + y * s + dy) * w + xx * s + dx];
                    }
                }
                out[(p * oh + y) * ow + xx] = acc / (s * s) as f64;
            }
        }
    }
    Tensor::new(&[n, c, oh, ow], out).unwrap()
}

pub fn naive_max_pool(x: &Tensor, s: usize) -> Tensor {
    let [n, c, h, w] = x.shape().try_into().unwrap();
    let (oh, ow) = (h / s, w / s);
    Tensor::from_fn(&[n, c, oh, ow], |i| {
        let (p, y, xx) = (i / (oh * ow), (i / ow) % oh, i % ow);
        let mut m = f64::NEG_INFINITY;
        for dy in 0..s {
            for dx in 0..s {
                m = m.max(x.data()[(p * h + y * s + dy) * w + xx * s + dx]);
            }
        }
        m
    })
}

pub fn naive_fc(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (n, d, k) = (x.dim(0), x.dim(1), w.dim(0));
    Tensor::from_fn(&[n, k], |i| {
        let (r, j) = (i / k, i % k);
        b.data()[j]
            + (0..d)
                .map(|t| x.data()[r * d + t] * w.data()[j * d + t])
                .sum::<f64>()
    })
}
