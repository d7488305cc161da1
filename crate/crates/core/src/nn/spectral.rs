//! Spectral normalization of convolution and linear weights.
//!
//! The weight is viewed as a matrix `W: (out, in*k*k)`. A persistent left
//! singular-vector estimate `u` is refined by power iteration (on the detached
//! weight) and the layer uses `W / sigma` with `sigma = u^T W v`,
//! `v = normalize(W^T u)`. Gradients flow through `sigma` via `W` only.

use candle_core::{Tensor, Var};

use crate::error::Result;
use crate::nn::layers::{Conv2d, Linear};
use crate::nn::params::Builder;

const POWER_EPS: f64 = 1e-12;

fn normalize(v: &Tensor) -> Result<Tensor> {
    let norm = v.sqr()?.sum_all()?.sqrt()?;
    Ok(v.broadcast_div(&(norm + POWER_EPS)?)?)
}

/// Persistent power-iteration state for one weight.
#[derive(Debug, Clone)]
pub struct SpectralState {
    u: Var,
}

impl SpectralState {
    fn new(b: &mut Builder, rows: usize) -> Result<Self> {
        let u = b.unit_vector(rows)?;
        Ok(Self {
            u: b.buffer("sn_u", u)?,
        })
    }

    /// Runs `iters` power-iteration steps against the detached matrix.
    fn iterate(&self, matrix: &Tensor, iters: usize) -> Result<()> {
        let w = matrix.detach();
        let mut u = self.u.as_tensor().detach();
        for _ in 0..iters {
            let v = normalize(&w.t()?.matmul(&u.unsqueeze(1)?)?.squeeze(1)?)?;
            u = normalize(&w.matmul(&v.unsqueeze(1)?)?.squeeze(1)?)?;
        }
        self.u.set(&u)?;
        Ok(())
    }

    /// `sigma = u^T W v` with `u`, `v` held constant.
    fn sigma(&self, matrix: &Tensor) -> Result<Tensor> {
        let u = self.u.as_tensor().detach().unsqueeze(1)?;
        let v = normalize(&matrix.detach().t()?.matmul(&u)?)?;
        Ok(u.t()?.matmul(&matrix.matmul(&v)?)?.reshape(())?)
    }
}

#[derive(Debug, Clone)]
pub struct SnConv2d {
    conv: Conv2d,
    state: SpectralState,
}

impl SnConv2d {
    pub fn new(
        b: &mut Builder,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let conv = Conv2d::new(b, name, in_ch, out_ch, kernel, stride, padding)?;
        let state = b.scoped(name, |b| SpectralState::new(b, out_ch))?;
        Ok(Self { conv, state })
    }

    fn matrix(&self) -> Result<Tensor> {
        let w = self.conv.weight();
        Ok(w.reshape((w.dims()[0], ()))?)
    }

    pub fn power_iterate(&self, iters: usize) -> Result<()> {
        self.state.iterate(&self.matrix()?, iters)
    }

    /// The weight actually applied, `W / sigma`.
    pub fn normalized_weight(&self) -> Result<Tensor> {
        let sigma = self.state.sigma(&self.matrix()?)?;
        Ok(self.conv.weight().broadcast_div(&sigma)?)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.conv.forward_with_weight(x, &self.normalized_weight()?)
    }
}

#[derive(Debug, Clone)]
pub struct SnLinear {
    linear: Linear,
    state: SpectralState,
}

impl SnLinear {
    pub fn new(b: &mut Builder, name: &str, in_dim: usize, out_dim: usize) -> Result<Self> {
        let linear = Linear::new(b, name, in_dim, out_dim)?;
        let state = b.scoped(name, |b| SpectralState::new(b, out_dim))?;
        Ok(Self { linear, state })
    }

    pub fn power_iterate(&self, iters: usize) -> Result<()> {
        self.state.iterate(self.linear.weight(), iters)
    }

    pub fn normalized_weight(&self) -> Result<Tensor> {
        let sigma = self.state.sigma(self.linear.weight())?;
        Ok(self.linear.weight().broadcast_div(&sigma)?)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.linear
            .forward_with_weight(x, &self.normalized_weight()?)
    }
}
