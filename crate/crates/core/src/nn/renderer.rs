//! Edge-to-photo renderer: a four-level U-Net with batch norm, trained on
//! fine edge maps and frozen while the refinement generator trains.

use candle_core::{Device, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nn::layers::{leaky_relu, upsample2x, BatchNorm2d, Conv2d};
use crate::nn::params::{Builder, ParamStore};
use crate::raster::{Mask, Photo, SketchMap};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RendererConfig {
    pub resolution: usize,
    pub base_channels: usize,
}

impl RendererConfig {
    pub fn new(resolution: usize, base_channels: usize) -> Result<Self> {
        let cfg = Self {
            resolution,
            base_channels,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 || !self.resolution.is_multiple_of(16) {
            return Err(invalid(format!(
                "renderer resolution {} must be a positive multiple of 16",
                self.resolution
            )));
        }
        if self.base_channels == 0 {
            return Err(invalid("renderer base_channels must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Renderer {
    cfg: RendererConfig,
    store: ParamStore,
    down: Vec<Conv2d>,
    down_bn: Vec<BatchNorm2d>,
    up: Vec<Conv2d>,
    up_bn: Vec<BatchNorm2d>,
}

impl Renderer {
    pub fn new(cfg: &RendererConfig, seed: u64, device: &Device) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.base_channels;
        let mut store = ParamStore::new(device.clone());
        let mut rng = seeded(seed);
        let mut b = Builder::new(&mut store, &mut rng);

        let down_widths = [5, c, 2 * c, 4 * c, 8 * c];
        let down = down_widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Conv2d::new(&mut b, &format!("down{i}"), w[0], w[1], 4, 2, 1))
            .collect::<Result<Vec<_>>>()?;
        let down_bn = (1..4)
            .map(|i| BatchNorm2d::new(&mut b, &format!("down{i}_bn"), down_widths[i + 1]))
            .collect::<Result<Vec<_>>>()?;
        // (in, out) for each upsampling conv; inputs after the first carry a skip.
        let up_widths = [(8 * c, 4 * c), (8 * c, 2 * c), (4 * c, c), (2 * c, 3)];
        let up = up_widths
            .iter()
            .enumerate()
            .map(|(i, &(i_ch, o_ch))| Conv2d::new(&mut b, &format!("up{i}"), i_ch, o_ch, 3, 1, 1))
            .collect::<Result<Vec<_>>>()?;
        let up_bn = (0..3)
            .map(|i| BatchNorm2d::new(&mut b, &format!("up{i}_bn"), up_widths[i].1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cfg: cfg.clone(),
            store,
            down,
            down_bn,
            up,
            up_bn,
        })
    }

    pub fn config(&self) -> &RendererConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn device(&self) -> &Device {
        self.store.device()
    }

    /// `(photo_in, sketch, mask) -> photo`. `train` selects batch statistics
    /// (and updates the running averages); otherwise running statistics are
    /// used and the call is pure.
    pub fn forward(
        &self,
        photo_in: &Tensor,
        sketch: &Tensor,
        mask: &Tensor,
        train: bool,
    ) -> Result<Tensor> {
        let (b, pc, h, w) = photo_in.dims4()?;
        let r = self.cfg.resolution;
        if pc != 3 || h != r || w != r {
            return Err(invalid(format!(
                "renderer photo has shape {:?}, expected (B, 3, {r}, {r})",
                photo_in.dims()
            )));
        }
        if sketch.dims() != [b, 1, r, r] || mask.dims() != [b, 1, r, r] {
            return Err(invalid(format!(
                "renderer sketch {:?} / mask {:?} do not match photo {:?}",
                sketch.dims(),
                mask.dims(),
                photo_in.dims()
            )));
        }
        let bn = |layer: &BatchNorm2d, x: &Tensor| {
            if train {
                layer.forward_train(x)
            } else {
                layer.forward_eval(x)
            }
        };

        let x = Tensor::cat(&[photo_in, sketch, mask], 1)?;
        let mut skips = Vec::with_capacity(4);
        let mut h = leaky_relu(&self.down[0].forward(&x)?, 0.2)?;
        skips.push(h.clone());
        for i in 1..4 {
            h = leaky_relu(&bn(&self.down_bn[i - 1], &self.down[i].forward(&h)?)?, 0.2)?;
            skips.push(h.clone());
        }
        // Bottleneck is skips[3]; walk back up through skips[2], [1], [0].
        for i in 0..3 {
            h = bn(&self.up_bn[i], &self.up[i].forward(&upsample2x(&h)?)?)?.relu()?;
            h = Tensor::cat(&[&h, &skips[2 - i]], 1)?;
        }
        Ok(self.up[3].forward(&upsample2x(&h)?)?.tanh()?)
    }

    /// Renders one sample with running statistics.
    pub fn render(&self, photo_in: &Photo, sketch: &SketchMap, mask: &Mask) -> Result<Photo> {
        let dev = self.device().clone();
        let out = self.forward(
            &photo_in.to_tensor(&dev)?,
            &sketch.to_tensor(&dev)?,
            &mask.to_tensor(&dev)?,
            false,
        )?;
        Photo::from_tensor(&out)
    }
}

/// `generated ⊙ M + original ⊙ (1 - M)`, evaluated per pixel so that the
/// known region is copied bit for bit.
pub fn composite(generated: &Photo, original: &Photo, mask: &Mask) -> Result<Photo> {
    if generated.dims() != original.dims() || generated.dims() != mask.dims() {
        return Err(invalid(format!(
            "composite inputs differ in size: {:?}, {:?}, {:?}",
            generated.dims(),
            original.dims(),
            mask.dims()
        )));
    }
    let (h, w) = original.dims();
    Ok(Photo::from_fn(h, w, |c, y, x| {
        if mask.get(y, x) {
            generated.get(c, y, x)
        } else {
            original.get(c, y, x)
        }
    }))
}
