use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::{
    relu, relu_backward, sigmoid, sigmoid_backward, swap_leading, BatchNorm2d, BatchNormCache, Conv2d,
    ConvTranspose2d, TAPS,
};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Real, Tensor};

/// Number of stride-2 blocks on each side of the bottleneck.
pub const BLOCKS: usize = 4;
pub const DOWNSAMPLE: usize = 1 << BLOCKS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    Conv4x4s2,
    ConvTranspose4x4s2,
    BatchNorm,
    Relu,
    Sigmoid,
}

impl LayerKind {
    pub fn code(self) -> u8 {
        match self {
            LayerKind::Conv4x4s2 => 0,
            LayerKind::ConvTranspose4x4s2 => 1,
            LayerKind::BatchNorm => 2,
            LayerKind::Relu => 3,
            LayerKind::Sigmoid => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => LayerKind::Conv4x4s2,
            1 => LayerKind::ConvTranspose4x4s2,
            2 => LayerKind::BatchNorm,
            3 => LayerKind::Relu,
            4 => LayerKind::Sigmoid,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
}

/// Channel plan of the autoencoder. The decoder mirrors the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_channels: usize,
    pub widths: [usize; BLOCKS],
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            input_channels: 3,
            widths: [32, 64, 128, 256],
        }
    }
}

impl Architecture {
    pub fn new(input_channels: usize, widths: [usize; BLOCKS]) -> Self {
        Architecture { input_channels, widths }
    }

    fn plan(&self) -> [usize; BLOCKS + 1] {
        let mut ch = [self.input_channels; BLOCKS + 1];
        ch[1..].copy_from_slice(&self.widths);
        ch
    }

    /// Ordered layer list: `BLOCKS` x (conv, bn, relu) then `BLOCKS` x
    /// (convT, bn, relu) with the last block ending in a sigmoid instead.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let ch = self.plan();
        let spec = |kind, i, o| LayerSpec {
            kind,
            in_channels: i,
            out_channels: o,
        };
        let mut specs = Vec::new();
        for b in 0..BLOCKS {
            specs.push(spec(LayerKind::Conv4x4s2, ch[b], ch[b + 1]));
            specs.push(spec(LayerKind::BatchNorm, ch[b + 1], ch[b + 1]));
            specs.push(spec(LayerKind::Relu, ch[b + 1], ch[b + 1]));
        }
        for b in (0..BLOCKS).rev() {
            specs.push(spec(LayerKind::ConvTranspose4x4s2, ch[b + 1], ch[b]));
            if b > 0 {
                specs.push(spec(LayerKind::BatchNorm, ch[b], ch[b]));
                specs.push(spec(LayerKind::Relu, ch[b], ch[b]));
            } else {
                specs.push(spec(LayerKind::Sigmoid, ch[b], ch[b]));
            }
        }
        specs
    }

    /// Index of the first decoder layer.
    pub fn encoder_len(&self) -> usize {
        3 * BLOCKS
    }

    pub fn latent_channels(&self) -> usize {
        self.widths[BLOCKS - 1]
    }

    /// Rebuilds an architecture from a layer list, checking that it has the
    /// exact shape [`Architecture::layer_specs`] produces.
    pub fn from_specs(specs: &[LayerSpec]) -> Result<Self> {
        let first = specs
            .first()
            .ok_or_else(|| Error::Checkpoint("empty layer list".into()))?;
        let mut widths = [0; BLOCKS];
        for (b, w) in widths.iter_mut().enumerate() {
            *w = specs
                .get(3 * b)
                .ok_or_else(|| Error::Checkpoint("truncated layer list".into()))?
                .out_channels;
        }
        let arch = Architecture::new(first.in_channels, widths);
        if arch.layer_specs() != specs {
            return Err(Error::Checkpoint("layer list does not describe a supported autoencoder".into()));
        }
        Ok(arch)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    ConvTranspose(ConvTranspose2d<T>),
    BatchNorm(BatchNorm2d<T>),
    Relu,
    Sigmoid,
}

#[derive(Clone, Debug)]
enum LayerCache<T> {
    Input(Tensor<T>),
    BatchNorm(BatchNormCache<T>),
    Output(Tensor<T>),
}

/// Activations retained by a training-mode forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    arch: Architecture,
    input_shape: Vec<usize>,
    layers: Vec<LayerCache<T>>,
}

/// Gradients aligned with [`ModelParams::trainable`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Tensor<T>>,
}

/// All weights and batch-norm statistics of the autoencoder.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    arch: Architecture,
    layers: Vec<Layer<T>>,
}

/// Parameter tensor role, used when naming tensors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorRole {
    Weight,
    Bias,
    Scale,
    Shift,
    RunningMean,
    RunningVar,
}

impl TensorRole {
    pub fn name(self) -> &'static str {
        match self {
            TensorRole::Weight => "weight",
            TensorRole::Bias => "bias",
            TensorRole::Scale => "scale",
            TensorRole::Shift => "shift",
            TensorRole::RunningMean => "running_mean",
            TensorRole::RunningVar => "running_var",
        }
    }

    pub fn trainable(self) -> bool {
        !matches!(self, TensorRole::RunningMean | TensorRole::RunningVar)
    }
}

impl<T: Real> ModelParams<T> {
    /// Kaiming-normal weights (`std = sqrt(2 / (in_channels * 16))`), zero
    /// biases, identity batch norm. Deterministic per seed.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut rng = rng::stream(&[rng::tag::INIT, seed]);
        let mut draw = |shape: &[usize], fan_in: usize| {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            let data = (0..shape.iter().product::<usize>())
                .map(|_| T::from_f64_lossy(normal.sample(&mut rng)))
                .collect();
            Tensor::from_vec(shape, data).expect("shape")
        };
        let layers = arch
            .layer_specs()
            .into_iter()
            .map(|s| match s.kind {
                LayerKind::Conv4x4s2 => {
                    let mut conv = Conv2d::zeros(s.in_channels, s.out_channels);
                    conv.weight = draw(conv.weight.shape(), s.in_channels * TAPS);
                    Layer::Conv(conv)
                }
                LayerKind::ConvTranspose4x4s2 => {
                    let mut conv = ConvTranspose2d::zeros(s.in_channels, s.out_channels);
                    conv.weight = draw(conv.weight.shape(), s.in_channels * TAPS);
                    Layer::ConvTranspose(conv)
                }
                LayerKind::BatchNorm => Layer::BatchNorm(BatchNorm2d::new(s.out_channels)),
                LayerKind::Relu => Layer::Relu,
                LayerKind::Sigmoid => Layer::Sigmoid,
            })
            .collect();
        ModelParams { arch, layers }
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Every tensor with its layer index and role, in a fixed order.
    pub fn tensors(&self) -> Vec<(usize, TensorRole, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv(c) => {
                    out.push((i, TensorRole::Weight, &c.weight));
                    out.push((i, TensorRole::Bias, &c.bias));
                }
                Layer::ConvTranspose(c) => {
                    out.push((i, TensorRole::Weight, &c.weight));
                    out.push((i, TensorRole::Bias, &c.bias));
                }
                Layer::BatchNorm(b) => {
                    out.push((i, TensorRole::Scale, &b.scale));
                    out.push((i, TensorRole::Shift, &b.shift));
                    out.push((i, TensorRole::RunningMean, &b.running_mean));
                    out.push((i, TensorRole::RunningVar, &b.running_var));
                }
                Layer::Relu | Layer::Sigmoid => {}
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(usize, TensorRole, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            match layer {
                Layer::Conv(c) => {
                    out.push((i, TensorRole::Weight, &mut c.weight));
                    out.push((i, TensorRole::Bias, &mut c.bias));
                }
                Layer::ConvTranspose(c) => {
                    out.push((i, TensorRole::Weight, &mut c.weight));
                    out.push((i, TensorRole::Bias, &mut c.bias));
                }
                Layer::BatchNorm(b) => {
                    out.push((i, TensorRole::Scale, &mut b.scale));
                    out.push((i, TensorRole::Shift, &mut b.shift));
                    out.push((i, TensorRole::RunningMean, &mut b.running_mean));
                    out.push((i, TensorRole::RunningVar, &mut b.running_var));
                }
                Layer::Relu | Layer::Sigmoid => {}
            }
        }
        out
    }

    pub fn tensor_name(layer: usize, role: TensorRole) -> String {
        format!("layers.{layer}.{}", role.name())
    }

    pub fn trainable(&self) -> Vec<&Tensor<T>> {
        self.tensors()
            .into_iter()
            .filter(|(_, r, _)| r.trainable())
            .map(|(_, _, t)| t)
            .collect()
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.tensors_mut()
            .into_iter()
            .filter(|(_, r, _)| r.trainable())
            .map(|(_, _, t)| t)
            .collect()
    }

    /// Learnable scalar count (running statistics excluded).
    pub fn parameter_count(&self) -> usize {
        self.trainable().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => Layer::Conv(Conv2d {
                    weight: c.weight.cast(),
                    bias: c.bias.cast(),
                }),
                Layer::ConvTranspose(c) => Layer::ConvTranspose(ConvTranspose2d {
                    weight: c.weight.cast(),
                    bias: c.bias.cast(),
                }),
                Layer::BatchNorm(b) => Layer::BatchNorm(BatchNorm2d {
                    scale: b.scale.cast(),
                    shift: b.shift.cast(),
                    running_mean: b.running_mean.cast(),
                    running_var: b.running_var.cast(),
                }),
                Layer::Relu => Layer::Relu,
                Layer::Sigmoid => Layer::Sigmoid,
            })
            .collect();
        ModelParams { arch: self.arch, layers }
    }

    fn check_batch(&self, x: &Tensor<T>) -> Result<()> {
        let (_, c, h, w) = x.dims4()?;
        if c != self.arch.input_channels {
            return Err(Error::InvalidInput(format!(
                "expected {} input channels, got {c}",
                self.arch.input_channels
            )));
        }
        if h == 0 || w == 0 || h % DOWNSAMPLE != 0 || w % DOWNSAMPLE != 0 {
            return Err(Error::InvalidInput(format!(
                "spatial size {h}x{w} must be a positive multiple of {DOWNSAMPLE}"
            )));
        }
        Ok(())
    }

    fn eval_layers(&self, layers: &[Layer<T>], mut a: Tensor<T>) -> Result<Tensor<T>> {
        for layer in layers {
            a = match layer {
                Layer::Conv(c) => c.forward(&a)?,
                Layer::ConvTranspose(c) => c.forward(&a)?,
                Layer::BatchNorm(b) => b.forward_eval(&a)?,
                Layer::Relu => relu(&a),
                Layer::Sigmoid => sigmoid(&a),
            };
        }
        Ok(a)
    }

    /// Inference pass using running statistics. Input and output are
    /// `(N, C, H, W)`.
    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_batch(x)?;
        let out = self.eval_layers(&self.layers, swap_leading(x)?)?;
        swap_leading(&out)
    }

    /// Encoder output (latent map) in `(N, C, H/16, W/16)`, inference mode.
    pub fn encode(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_batch(x)?;
        let out = self.eval_layers(&self.layers[..self.arch.encoder_len()], swap_leading(x)?)?;
        swap_leading(&out)
    }

    /// Training pass: batch statistics, running-stat updates, and a cache for
    /// [`ModelParams::backward`]. Requires at least two samples.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_batch(x)?;
        if x.shape()[0] < 2 {
            return Err(Error::InvalidInput(
                "training-mode forward needs a batch of at least 2".into(),
            ));
        }
        let mut a = swap_leading(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let (next, cache) = match layer {
                Layer::Conv(c) => (c.forward(&a)?, LayerCache::Input(a)),
                Layer::ConvTranspose(c) => (c.forward(&a)?, LayerCache::Input(a)),
                Layer::BatchNorm(b) => {
                    let (y, cache) = b.forward_train(&a)?;
                    (y, LayerCache::BatchNorm(cache))
                }
                Layer::Relu => {
                    let y = relu(&a);
                    (y.clone(), LayerCache::Output(y))
                }
                Layer::Sigmoid => {
                    let y = sigmoid(&a);
                    (y.clone(), LayerCache::Output(y))
                }
            };
            caches.push(cache);
            a = next;
        }
        Ok((
            swap_leading(&a)?,
            ForwardCache {
                arch: self.arch,
                input_shape: x.shape().to_vec(),
                layers: caches,
            },
        ))
    }

    /// Reverse pass for a cache produced by [`ModelParams::forward_train`] on
    /// a model with the same architecture.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_output: &Tensor<T>) -> Result<Gradients<T>> {
        if cache.arch != self.arch || cache.layers.len() != self.layers.len() {
            return Err(Error::InvalidInput("forward cache does not belong to this model".into()));
        }
        if grad_output.shape() != cache.input_shape.as_slice() {
            return Err(Error::shape(&cache.input_shape, grad_output.shape()));
        }
        let mut g = swap_leading(grad_output)?;
        let mut per_layer: Vec<Vec<Tensor<T>>> = Vec::with_capacity(self.layers.len());
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            let (dx, grads) = match (layer, c) {
                (Layer::Conv(conv), LayerCache::Input(x)) => conv.backward(x, &g)?,
                (Layer::ConvTranspose(conv), LayerCache::Input(x)) => conv.backward(x, &g)?,
                (Layer::BatchNorm(bn), LayerCache::BatchNorm(bc)) => bn.backward(bc, &g)?,
                (Layer::Relu, LayerCache::Output(y)) => (relu_backward(y, &g)?, Vec::new()),
                (Layer::Sigmoid, LayerCache::Output(y)) => (sigmoid_backward(y, &g)?, Vec::new()),
                _ => return Err(Error::InvalidInput("forward cache layer kinds do not match".into())),
            };
            per_layer.push(grads);
            g = dx;
        }
        per_layer.reverse();
        Ok(Gradients {
            tensors: per_layer.into_iter().flatten().collect(),
        })
    }
}
