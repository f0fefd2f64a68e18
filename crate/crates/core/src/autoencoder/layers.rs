//! Layer kernels with explicit forward and reverse passes.
//!
//! Activations flow through the network in channel-major batch layout
//! `(C, N, H, W)`: every channel is one contiguous block, which turns the
//! convolutions into a single GEMM over the whole batch and makes batch
//! normalization a pass over contiguous memory.
//!
//! Both convolutions use a 4x4 kernel, stride 2 and padding 1, so spatial
//! size exactly halves (conv) or doubles (transposed conv).

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub const KERNEL: usize = 4;
pub const TAPS: usize = KERNEL * KERNEL;

/// Unfolds a `(C, N, H, W)` grid into a `(C*16) x (N*H/2*W/2)` column matrix.
fn im2col<T: Real>(x: &[T], c: usize, n: usize, h: usize, w: usize) -> Vec<T> {
    let (ho, wo) = (h / 2, w / 2);
    let cols_per_row = n * ho * wo;
    let mut cols = vec![T::zero(); c * TAPS * cols_per_row];
    for ci in 0..c {
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &mut cols[((ci * KERNEL + ky) * KERNEL + kx) * cols_per_row..][..cols_per_row];
                for ni in 0..n {
                    let plane = &x[(ci * n + ni) * h * w..][..h * w];
                    for oy in 0..ho {
                        let iy = (2 * oy + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..][..w];
                        let dst = &mut row[(ni * ho + oy) * wo..][..wo];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (2 * ox + kx) as isize - 1;
                            if ix >= 0 && ix < w as isize {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters columns back onto the `(C, N, H, W)` grid,
/// summing overlapping taps.
fn col2im<T: Real>(cols: &[T], c: usize, n: usize, h: usize, w: usize) -> Vec<T> {
    let (ho, wo) = (h / 2, w / 2);
    let cols_per_row = n * ho * wo;
    let mut x = vec![T::zero(); c * n * h * w];
    for ci in 0..c {
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &cols[((ci * KERNEL + ky) * KERNEL + kx) * cols_per_row..][..cols_per_row];
                for ni in 0..n {
                    let plane = &mut x[(ci * n + ni) * h * w..][..h * w];
                    for oy in 0..ho {
                        let iy = (2 * oy + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..][..w];
                        let src = &row[(ni * ho + oy) * wo..][..wo];
                        for (ox, &s) in src.iter().enumerate() {
                            let ix = (2 * ox + kx) as isize - 1;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += s;
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

fn check_input<T: Real>(x: &Tensor<T>, channels: usize) -> Result<(usize, usize, usize)> {
    let (c, n, h, w) = x.dims4()?;
    if c != channels {
        return Err(Error::shape(&[channels, n, h, w], x.shape()));
    }
    Ok((n, h, w))
}

fn add_channel_bias<T: Real>(out: &mut [T], bias: &[T]) {
    let plane = out.len() / bias.len();
    for (chunk, &b) in out.chunks_exact_mut(plane).zip(bias) {
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn channel_sums<T: Real>(dy: &[T], channels: usize) -> Vec<T> {
    let plane = dy.len() / channels;
    dy.chunks_exact(plane).map(|c| c.iter().copied().sum()).collect()
}

/// Strided 4x4 convolution, weights `(out, in, 4, 4)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(in_ch: usize, out_ch: usize) -> Self {
        Conv2d {
            weight: Tensor::zeros(&[out_ch, in_ch, KERNEL, KERNEL]),
            bias: Tensor::zeros(&[out_ch]),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (cin, cout) = (self.in_channels(), self.out_channels());
        let (n, h, w) = check_input(x, cin)?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::InvalidInput(format!("conv input {h}x{w} must have even sides")));
        }
        let cols = im2col(x.data(), cin, n, h, w);
        let p = n * (h / 2) * (w / 2);
        let k = cin * TAPS;
        let mut out = vec![T::zero(); cout * p];
        T::gemm(cout, k, p, T::one(), self.weight.data(), (k as isize, 1), &cols, (p as isize, 1), T::zero(), &mut out, (p as isize, 1));
        add_channel_bias(&mut out, self.bias.data());
        Tensor::from_vec(&[cout, n, h / 2, w / 2], out)
    }

    /// Returns `(dx, [dweight, dbias])` for the cached input `x`.
    pub fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        let (cin, cout) = (self.in_channels(), self.out_channels());
        let (n, h, w) = check_input(x, cin)?;
        let expected = [cout, n, h / 2, w / 2];
        if dy.shape() != expected {
            return Err(Error::shape(&expected, dy.shape()));
        }
        let cols = im2col(x.data(), cin, n, h, w);
        let p = n * (h / 2) * (w / 2);
        let k = cin * TAPS;

        let mut dweight = Tensor::zeros(self.weight.shape());
        // dW (cout x k) = dy (cout x p) * cols^T (p x k)
        T::gemm(cout, p, k, T::one(), dy.data(), (p as isize, 1), &cols, (1, p as isize), T::zero(), dweight.data_mut(), (k as isize, 1));
        let dbias = Tensor::from_vec(&[cout], channel_sums(dy.data(), cout))?;

        // dcols (k x p) = W^T (k x cout) * dy (cout x p)
        let mut dcols = vec![T::zero(); k * p];
        T::gemm(k, cout, p, T::one(), self.weight.data(), (1, k as isize), dy.data(), (p as isize, 1), T::zero(), &mut dcols, (p as isize, 1));
        let dx = Tensor::from_vec(x.shape(), col2im(&dcols, cin, n, h, w))?;
        Ok((dx, vec![dweight, dbias]))
    }
}

/// Strided 4x4 transposed convolution, weights `(in, out, 4, 4)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvTranspose2d<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> ConvTranspose2d<T> {
    pub fn zeros(in_ch: usize, out_ch: usize) -> Self {
        ConvTranspose2d {
            weight: Tensor::zeros(&[in_ch, out_ch, KERNEL, KERNEL]),
            bias: Tensor::zeros(&[out_ch]),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (cin, cout) = (self.in_channels(), self.out_channels());
        let (n, h, w) = check_input(x, cin)?;
        let p = n * h * w;
        let k = cout * TAPS;
        // cols (k x p) = W^T (k x cin) * x (cin x p)
        let mut cols = vec![T::zero(); k * p];
        T::gemm(k, cin, p, T::one(), self.weight.data(), (1, k as isize), x.data(), (p as isize, 1), T::zero(), &mut cols, (p as isize, 1));
        let mut out = col2im(&cols, cout, n, 2 * h, 2 * w);
        add_channel_bias(&mut out, self.bias.data());
        Tensor::from_vec(&[cout, n, 2 * h, 2 * w], out)
    }

    pub fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        let (cin, cout) = (self.in_channels(), self.out_channels());
        let (n, h, w) = check_input(x, cin)?;
        let expected = [cout, n, 2 * h, 2 * w];
        if dy.shape() != expected {
            return Err(Error::shape(&expected, dy.shape()));
        }
        let p = n * h * w;
        let k = cout * TAPS;
        let dcols = im2col(dy.data(), cout, n, 2 * h, 2 * w);

        let mut dweight = Tensor::zeros(self.weight.shape());
        // dW (cin x k) = x (cin x p) * dcols^T (p x k)
        T::gemm(cin, p, k, T::one(), x.data(), (p as isize, 1), &dcols, (1, p as isize), T::zero(), dweight.data_mut(), (k as isize, 1));
        let dbias = Tensor::from_vec(&[cout], channel_sums(dy.data(), cout))?;

        // dx (cin x p) = W (cin x k) * dcols (k x p)
        let mut dx = vec![T::zero(); cin * p];
        T::gemm(cin, k, p, T::one(), self.weight.data(), (k as isize, 1), &dcols, (p as isize, 1), T::zero(), &mut dx, (p as isize, 1));
        Ok((Tensor::from_vec(x.shape(), dx)?, vec![dweight, dbias]))
    }
}

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// Per-channel batch normalization with running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm2d<T> {
    pub scale: Tensor<T>,
    pub shift: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
}

/// Values kept from a training-mode forward pass.
#[derive(Clone, Debug)]
pub struct BatchNormCache<T> {
    pub normalized: Tensor<T>,
    pub inv_std: Vec<T>,
}

impl<T: Real> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            scale: Tensor::full(&[channels], T::one()),
            shift: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }

    /// Normalizes with batch statistics and updates the running estimates
    /// (unbiased variance, momentum 0.1).
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, BatchNormCache<T>)> {
        let c = self.channels();
        check_input(x, c)?;
        let m = x.len() / c;
        if m < 2 {
            return Err(Error::InvalidInput(
                "batch statistics need at least two values per channel".into(),
            ));
        }
        let mf = T::from_usize(m).expect("count");
        let eps = T::from_f64_lossy(BN_EPS);
        let mom = T::from_f64_lossy(BN_MOMENTUM);
        let unbias = mf / (mf - T::one());
        let mut out = vec![T::zero(); x.len()];
        let mut normalized = vec![T::zero(); x.len()];
        let mut inv_std = Vec::with_capacity(c);
        for ch in 0..c {
            let xs = &x.data()[ch * m..][..m];
            let mean = xs.iter().copied().sum::<T>() / mf;
            let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / mf;
            let istd = T::one() / (var + eps).sqrt();
            let (g, b) = (self.scale.data()[ch], self.shift.data()[ch]);
            for ((o, nrm), &v) in out[ch * m..][..m]
                .iter_mut()
                .zip(&mut normalized[ch * m..][..m])
                .zip(xs)
            {
                *nrm = (v - mean) * istd;
                *o = g * *nrm + b;
            }
            inv_std.push(istd);
            let rm = &mut self.running_mean.data_mut()[ch];
            *rm = (T::one() - mom) * *rm + mom * mean;
            let rv = &mut self.running_var.data_mut()[ch];
            *rv = (T::one() - mom) * *rv + mom * var * unbias;
        }
        Ok((
            Tensor::from_vec(x.shape(), out)?,
            BatchNormCache {
                normalized: Tensor::from_vec(x.shape(), normalized)?,
                inv_std,
            },
        ))
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let c = self.channels();
        check_input(x, c)?;
        let m = x.len() / c;
        let eps = T::from_f64_lossy(BN_EPS);
        let mut out = x.data().to_vec();
        for ch in 0..c {
            let istd = T::one() / (self.running_var.data()[ch] + eps).sqrt();
            let mean = self.running_mean.data()[ch];
            let (g, b) = (self.scale.data()[ch], self.shift.data()[ch]);
            for v in &mut out[ch * m..][..m] {
                *v = g * (*v - mean) * istd + b;
            }
        }
        Tensor::from_vec(x.shape(), out)
    }

    /// Gradient through the batch-statistics path. Returns `(dx, [dscale, dshift])`.
    pub fn backward(&self, cache: &BatchNormCache<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        cache.normalized.ensure_same_shape(dy)?;
        let c = self.channels();
        let m = dy.len() / c;
        let mf = T::from_usize(m).expect("count");
        let mut dx = vec![T::zero(); dy.len()];
        let mut dscale = Vec::with_capacity(c);
        let mut dshift = Vec::with_capacity(c);
        for ch in 0..c {
            let g = &dy.data()[ch * m..][..m];
            let xh = &cache.normalized.data()[ch * m..][..m];
            let sum_g: T = g.iter().copied().sum();
            let sum_gx: T = g.iter().zip(xh).map(|(&a, &b)| a * b).sum();
            let k = self.scale.data()[ch] * cache.inv_std[ch] / mf;
            for ((d, &gi), &xi) in dx[ch * m..][..m].iter_mut().zip(g).zip(xh) {
                *d = k * (mf * gi - sum_g - xi * sum_gx);
            }
            dscale.push(sum_gx);
            dshift.push(sum_g);
        }
        Ok((
            Tensor::from_vec(dy.shape(), dx)?,
            vec![Tensor::from_vec(&[c], dscale)?, Tensor::from_vec(&[c], dshift)?],
        ))
    }
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero()))
}

/// Backward through ReLU given its *output*.
pub fn relu_backward<T: Real>(y: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
    y.ensure_same_shape(dy)?;
    let data = y
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&o, &g)| if o > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(y.shape(), data)
}

pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| T::one() / (T::one() + (-v).exp()))
}

/// Backward through the logistic sigmoid given its *output*.
pub fn sigmoid_backward<T: Real>(y: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
    y.ensure_same_shape(dy)?;
    let data = y
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&o, &g)| g * o * (T::one() - o))
        .collect();
    Tensor::from_vec(y.shape(), data)
}

/// Reorders `(A, B, H, W)` into `(B, A, H, W)`; converts between the
/// sample-major layout used at the model boundary and the channel-major
/// layout used inside.
pub fn swap_leading<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (a, b, h, w) = x.dims4()?;
    let plane = h * w;
    let mut out = Vec::with_capacity(x.len());
    for bi in 0..b {
        for ai in 0..a {
            out.extend_from_slice(&x.data()[(ai * b + bi) * plane..][..plane]);
        }
    }
    Tensor::from_vec(&[b, a, h, w], out)
}
