use candle_core::{Tensor, Var, D};

use crate::error::{invalid, Result};
use crate::nn::params::Builder;

/// Normalization epsilon for instance, adaptive-instance and batch norm.
pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Conv2d {
    weight: Var,
    bias: Var,
    stride: usize,
    padding: usize,
}

impl Conv2d {
    pub fn new(
        b: &mut Builder,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(Self {
                weight: b.uniform_weight("weight", (out_ch, in_ch, kernel, kernel))?,
                bias: b.constant("bias", out_ch, 0.0)?,
                stride,
                padding,
            })
        })
    }

    pub fn weight(&self) -> &Tensor {
        self.weight.as_tensor()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_with_weight(x, self.weight.as_tensor())
    }

    /// Convolution with a substitute kernel of the same shape (spectral norm).
    pub fn forward_with_weight(&self, x: &Tensor, weight: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(weight, self.padding, self.stride, 1, 1)?;
        let b = self.bias.as_tensor().reshape((1, (), 1, 1))?;
        Ok(y.broadcast_add(&b)?)
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    weight: Var,
    bias: Var,
}

impl Linear {
    pub fn new(b: &mut Builder, name: &str, in_dim: usize, out_dim: usize) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(Self {
                weight: b.uniform_weight("weight", (out_dim, in_dim))?,
                bias: b.constant("bias", out_dim, 0.0)?,
            })
        })
    }

    pub fn weight(&self) -> &Tensor {
        self.weight.as_tensor()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.dims()[0]
    }

    /// `x: (B, in) -> (B, out)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_with_weight(x, self.weight.as_tensor())
    }

    pub fn forward_with_weight(&self, x: &Tensor, weight: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(&weight.t()?)?
            .broadcast_add(self.bias.as_tensor())?)
    }
}

/// Per-sample, per-channel standardization over the spatial dims.
pub fn instance_norm(x: &Tensor) -> Result<Tensor> {
    let mean = x.mean_keepdim(D::Minus1)?.mean_keepdim(D::Minus2)?;
    let centered = x.broadcast_sub(&mean)?;
    let var = centered
        .sqr()?
        .mean_keepdim(D::Minus1)?
        .mean_keepdim(D::Minus2)?;
    Ok(centered.broadcast_div(&(var + NORM_EPS)?.sqrt()?)?)
}

/// Adaptive instance normalization:
/// `std_c * (f - mean(f_c)) / sqrt(var(f_c) + eps) + mean_c`.
///
/// `x: (B, C, H, W)`; `mean`, `std`: `(B, C)`. `std` must already be positive.
pub fn adain(x: &Tensor, mean: &Tensor, std: &Tensor) -> Result<Tensor> {
    let (b, c, _, _) = x.dims4()?;
    if mean.dims() != [b, c] || std.dims() != [b, c] {
        return Err(invalid(format!(
            "style statistics {:?}/{:?} do not match features {:?}",
            mean.dims(),
            std.dims(),
            x.dims()
        )));
    }
    let normalized = instance_norm(x)?;
    let scale = std.reshape((b, c, 1, 1))?;
    let shift = mean.reshape((b, c, 1, 1))?;
    Ok(normalized.broadcast_mul(&scale)?.broadcast_add(&shift)?)
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    Ok(x.maximum(&(x * slope)?)?)
}

/// Logistic sigmoid via `tanh`, which has a stable gradient for large |x|.
pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok((((x * 0.5)?.tanh()? + 1.0)? * 0.5)?)
}

pub fn upsample2x(x: &Tensor) -> Result<Tensor> {
    let (_, _, h, w) = x.dims4()?;
    Ok(x.upsample_nearest2d(2 * h, 2 * w)?)
}

/// Batch normalization with running statistics stored as buffers.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    gamma: Var,
    beta: Var,
    running_mean: Var,
    running_var: Var,
    momentum: f64,
}

impl BatchNorm2d {
    pub fn new(b: &mut Builder, name: &str, channels: usize) -> Result<Self> {
        let device = b.device();
        b.scoped(name, |b| {
            Ok(Self {
                gamma: b.constant("weight", channels, 1.0)?,
                beta: b.constant("bias", channels, 0.0)?,
                running_mean: b.buffer(
                    "running_mean",
                    Tensor::zeros(channels, crate::raster::DTYPE, &device)?,
                )?,
                running_var: b.buffer(
                    "running_var",
                    Tensor::ones(channels, crate::raster::DTYPE, &device)?,
                )?,
                momentum: 0.1,
            })
        })
    }

    fn affine(&self, normalized: &Tensor) -> Result<Tensor> {
        let g = self.gamma.as_tensor().reshape((1, (), 1, 1))?;
        let b = self.beta.as_tensor().reshape((1, (), 1, 1))?;
        Ok(normalized.broadcast_mul(&g)?.broadcast_add(&b)?)
    }

    /// Normalizes with batch statistics and updates the running averages.
    pub fn forward_train(&self, x: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = x.dims4()?;
        let count = (n * h * w) as f64;
        let flat = x.transpose(0, 1)?.reshape((c, n * h * w))?;
        let mean = flat.mean_keepdim(1)?;
        let centered = flat.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(1)?;
        let normalized = centered
            .broadcast_div(&(&var + NORM_EPS)?.sqrt()?)?
            .reshape((c, n, h, w))?
            .transpose(0, 1)?;

        let m = self.momentum;
        let unbiased = if count > 1.0 {
            (var.detach() * (count / (count - 1.0)))?
        } else {
            var.detach()
        };
        let new_mean =
            ((self.running_mean.as_tensor() * (1.0 - m))? + (mean.detach().flatten_all()? * m)?)?;
        let new_var =
            ((self.running_var.as_tensor() * (1.0 - m))? + (unbiased.flatten_all()? * m)?)?;
        self.running_mean.set(&new_mean)?;
        self.running_var.set(&new_var)?;
        self.affine(&normalized)
    }

    /// Normalizes with the running statistics.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        let mean = self.running_mean.as_tensor().reshape((1, (), 1, 1))?;
        let std = (self.running_var.as_tensor() + NORM_EPS)?
            .sqrt()?
            .reshape((1, (), 1, 1))?;
        let normalized = x.broadcast_sub(&mean)?.broadcast_div(&std)?;
        self.affine(&normalized)
    }
}
