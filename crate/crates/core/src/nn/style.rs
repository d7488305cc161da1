//! Level-to-style mapping: an MLP decodes the scalar refinement level into a
//! global style code, and two linear heads per AdaIN layer map that code to
//! the layer's target mean and (log) standard deviation.

use candle_core::Tensor;

use crate::error::Result;
use crate::nn::layers::{leaky_relu, Linear};
use crate::nn::params::Builder;

/// Per-layer AdaIN target. `raw_std` is unconstrained; the applied standard
/// deviation is `exp(raw_std)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStyle {
    pub mean: Vec<f64>,
    pub raw_std: Vec<f64>,
}

impl LayerStyle {
    pub fn std(&self) -> Vec<f64> {
        self.raw_std.iter().map(|v| v.exp()).collect()
    }
}

/// Style decoded from one refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleBundle {
    pub global_code: Vec<f64>,
    pub per_layer: Vec<LayerStyle>,
}

#[derive(Debug, Clone)]
pub struct StyleMlp {
    hidden: Vec<Linear>,
    out: Linear,
}

impl StyleMlp {
    pub fn new(b: &mut Builder, d_style: usize, hidden_layers: usize) -> Result<Self> {
        let hidden = (0..hidden_layers)
            .map(|i| {
                Linear::new(
                    b,
                    &format!("hidden{i}"),
                    if i == 0 { 1 } else { d_style },
                    d_style,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let in_dim = if hidden_layers == 0 { 1 } else { d_style };
        let out = Linear::new(b, "out", in_dim, d_style)?;
        Ok(Self { hidden, out })
    }

    /// `levels: (B, 1) -> (B, d_style)`.
    pub fn forward(&self, levels: &Tensor) -> Result<Tensor> {
        let mut h = levels.clone();
        for layer in &self.hidden {
            h = leaky_relu(&layer.forward(&h)?, 0.2)?;
        }
        self.out.forward(&h)
    }
}

#[derive(Debug, Clone)]
pub struct StyleHeads {
    heads: Vec<(Linear, Linear)>,
}

impl StyleHeads {
    pub fn new(b: &mut Builder, d_style: usize, channels: &[usize]) -> Result<Self> {
        let heads = channels
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                b.scoped(&format!("layer{i}"), |b| {
                    Ok((
                        Linear::new(b, "mean", d_style, c)?,
                        Linear::new(b, "log_std", d_style, c)?,
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { heads })
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    /// `(mean, raw_std)` per layer, each `(B, C_layer)`.
    pub fn forward_raw(&self, code: &Tensor) -> Result<Vec<(Tensor, Tensor)>> {
        self.heads
            .iter()
            .map(|(m, s)| Ok((m.forward(code)?, s.forward(code)?)))
            .collect()
    }
}
