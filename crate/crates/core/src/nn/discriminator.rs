//! Spectrally normalized patch discriminator.
//!
//! Input is the concatenation `(photo, sketch, mask)`, five channels. Three
//! stride-2 `4×4` conv + LeakyReLU blocks, `depth` further stride-2 blocks,
//! then a `3×3` conv to one channel. Output is a raw patch-score grid; there
//! is no sigmoid. With `score_head` set, a spectrally normalized linear layer
//! maps the flattened grid to one score per sample.

use candle_core::{Device, Tensor};

use crate::error::{invalid, Result};
use crate::nn::config::NetworkConfig;
use crate::nn::layers::leaky_relu;
use crate::nn::params::{Builder, ParamStore};
use crate::nn::spectral::{SnConv2d, SnLinear};
use crate::rng::seeded;

#[derive(Debug, Clone)]
pub struct Discriminator {
    resolution: usize,
    grid: usize,
    store: ParamStore,
    blocks: Vec<SnConv2d>,
    final_conv: SnConv2d,
    score_head: Option<SnLinear>,
}

impl Discriminator {
    pub fn new(cfg: &NetworkConfig, score_head: bool, seed: u64, device: &Device) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.base_channels;
        let mut store = ParamStore::new(device.clone());
        let mut rng = seeded(seed);
        let mut b = Builder::new(&mut store, &mut rng);

        let mut widths = vec![5, c, 2 * c, 4 * c];
        widths.extend(std::iter::repeat_n(4 * c, cfg.discriminator_depth));
        let blocks = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| SnConv2d::new(&mut b, &format!("block{i}"), w[0], w[1], 4, 2, 1))
            .collect::<Result<Vec<_>>>()?;
        let final_conv = SnConv2d::new(&mut b, "final", 4 * c, 1, 3, 1, 1)?;
        let grid = cfg.score_grid();
        let score_head = if score_head {
            Some(SnLinear::new(&mut b, "score", grid * grid, 1)?)
        } else {
            None
        };
        Ok(Self {
            resolution: cfg.resolution,
            grid,
            store,
            blocks,
            final_conv,
            score_head,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    /// Side of the patch-score grid.
    pub fn score_grid(&self) -> usize {
        self.grid
    }

    /// Spectrally normalized layers in forward order (for inspection).
    pub fn spectral_convs(&self) -> impl Iterator<Item = &SnConv2d> {
        self.blocks.iter().chain(std::iter::once(&self.final_conv))
    }

    pub fn score_head(&self) -> Option<&SnLinear> {
        self.score_head.as_ref()
    }

    /// Refines every singular-vector estimate by `iters` power-iteration steps.
    pub fn power_iterate(&self, iters: usize) -> Result<()> {
        for conv in self.spectral_convs() {
            conv.power_iterate(iters)?;
        }
        if let Some(head) = &self.score_head {
            head.power_iterate(iters)?;
        }
        Ok(())
    }

    /// Scores `(B,1,g,g)`, or `(B,1)` with a score head. Pure in the parameters.
    pub fn forward(&self, photo: &Tensor, sketch: &Tensor, mask: &Tensor) -> Result<Tensor> {
        let (b, pc, h, w) = photo.dims4()?;
        let r = self.resolution;
        if pc != 3 || h != r || w != r {
            return Err(invalid(format!(
                "discriminator photo has shape {:?}, expected (B, 3, {r}, {r})",
                photo.dims()
            )));
        }
        if sketch.dims() != [b, 1, r, r] || mask.dims() != [b, 1, r, r] {
            return Err(invalid(format!(
                "discriminator sketch {:?} / mask {:?} do not match photo {:?}",
                sketch.dims(),
                mask.dims(),
                photo.dims()
            )));
        }
        let mut x = Tensor::cat(&[photo, sketch, mask], 1)?;
        for block in &self.blocks {
            x = leaky_relu(&block.forward(&x)?, 0.2)?;
        }
        let scores = self.final_conv.forward(&x)?;
        match &self.score_head {
            Some(head) => head.forward(&scores.flatten_from(1)?),
            None => Ok(scores),
        }
    }
}
