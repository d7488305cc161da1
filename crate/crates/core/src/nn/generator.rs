//! Level-conditioned refinement generator: a fully convolutional
//! encoder / residual-block / decoder network with encoder-decoder skip
//! connections. Every convolution except the first and the last is followed
//! by AdaIN whose statistics are decoded from the refinement level
//! (or by plain instance norm in the label-concatenation variant).

use candle_core::{Device, Tensor};

use crate::error::{invalid, Result};
use crate::nn::config::{Conditioning, GeneratorMode, NetworkConfig};
use crate::nn::layers::{adain, instance_norm, sigmoid, upsample2x, Conv2d};
use crate::nn::params::{Builder, ParamStore};
use crate::nn::style::{LayerStyle, StyleBundle, StyleHeads, StyleMlp};
use crate::raster::{Mask, Photo, RefinementLevel, SketchMap, DTYPE};
use crate::rng::seeded;

/// Batched generator inputs. Shapes: photo `(B,3,H,W)`, drawable and mask
/// `(B,1,H,W)`, levels `(B,)`.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorInputs<'a> {
    pub photo_in: Option<&'a Tensor>,
    pub drawable: &'a Tensor,
    pub mask: Option<&'a Tensor>,
    pub levels: &'a Tensor,
}

/// Generated photo `(B,3,H,W)` in `[-1,1]` and refined sketch `(B,1,H,W)` in `[0,1]`.
#[derive(Debug, Clone)]
pub struct GeneratorTensors {
    pub photo: Tensor,
    pub sketch: Tensor,
}

/// Single-sample generator output.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOutput {
    pub photo: Photo,
    pub sketch: SketchMap,
}

#[derive(Debug, Clone)]
struct ResBlock {
    a: Conv2d,
    b: Conv2d,
}

#[derive(Debug, Clone)]
struct StyleControl {
    mlp: StyleMlp,
    heads: StyleHeads,
}

#[derive(Debug, Clone)]
pub struct Generator {
    cfg: NetworkConfig,
    store: ParamStore,
    enc0: Conv2d,
    enc1: Conv2d,
    enc2: Conv2d,
    blocks: Vec<ResBlock>,
    dec1: Conv2d,
    dec2: Conv2d,
    out: Conv2d,
    style: Option<StyleControl>,
}

impl Generator {
    pub fn new(cfg: &NetworkConfig, seed: u64, device: &Device) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.base_channels;
        let mut in_ch = match cfg.mode {
            GeneratorMode::Edit => 5,
            GeneratorMode::Synth => 1,
        };
        if cfg.conditioning == Conditioning::Concat {
            in_ch += 1;
        }
        let mut store = ParamStore::new(device.clone());
        let mut rng = seeded(seed);
        let mut b = Builder::new(&mut store, &mut rng);

        let enc0 = Conv2d::new(&mut b, "enc0", in_ch, c, 3, 1, 1)?;
        let enc1 = Conv2d::new(&mut b, "enc1", c, 2 * c, 3, 2, 1)?;
        let enc2 = Conv2d::new(&mut b, "enc2", 2 * c, 4 * c, 3, 2, 1)?;
        let blocks = (0..cfg.n_resblocks)
            .map(|i| {
                b.scoped(&format!("res{i}"), |b| {
                    Ok(ResBlock {
                        a: Conv2d::new(b, "a", 4 * c, 4 * c, 3, 1, 1)?,
                        b: Conv2d::new(b, "b", 4 * c, 4 * c, 3, 1, 1)?,
                    })
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let dec1 = Conv2d::new(&mut b, "dec1", 4 * c + 2 * c, 2 * c, 3, 1, 1)?;
        let dec2 = Conv2d::new(&mut b, "dec2", 2 * c + c, c, 3, 1, 1)?;
        let out = Conv2d::new(&mut b, "out", c, 4, 3, 1, 1)?;

        let style = match cfg.conditioning {
            Conditioning::Style => Some(b.scoped("style", |b| {
                let mlp = b.scoped("mlp", |b| {
                    StyleMlp::new(b, cfg.d_style, cfg.style_hidden_layers)
                })?;
                let channels = Self::norm_channels_for(cfg);
                let heads = b.scoped("heads", |b| StyleHeads::new(b, cfg.d_style, &channels))?;
                Ok::<_, crate::Error>(StyleControl { mlp, heads })
            })?),
            Conditioning::Concat => None,
        };

        Ok(Self {
            cfg: cfg.clone(),
            store,
            enc0,
            enc1,
            enc2,
            blocks,
            dec1,
            dec2,
            out,
            style,
        })
    }

    fn norm_channels_for(cfg: &NetworkConfig) -> Vec<usize> {
        let c = cfg.base_channels;
        let mut channels = vec![2 * c, 4 * c];
        channels.extend(std::iter::repeat_n(4 * c, 2 * cfg.n_resblocks));
        channels.extend([2 * c, c]);
        channels
    }

    /// Channel count of every normalized (AdaIN-bearing) layer, in order.
    pub fn norm_channels(&self) -> Vec<usize> {
        Self::norm_channels_for(&self.cfg)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn device(&self) -> &Device {
        self.store.device()
    }

    /// Decodes one level into its style bundle.
    pub fn style_bundle(&self, level: RefinementLevel) -> Result<StyleBundle> {
        let style = self
            .style
            .as_ref()
            .ok_or_else(|| invalid("label-concatenation generators have no style code"))?;
        let levels = Tensor::new(&[[level.value()]], self.device())?;
        let code = style.mlp.forward(&levels)?;
        let per_layer = style
            .heads
            .forward_raw(&code)?
            .into_iter()
            .map(|(m, s)| {
                Ok(LayerStyle {
                    mean: m.squeeze(0)?.to_vec1::<f64>()?,
                    raw_std: s.squeeze(0)?.to_vec1::<f64>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StyleBundle {
            global_code: code.squeeze(0)?.to_vec1::<f64>()?,
            per_layer,
        })
    }

    fn check_spatial(&self, t: &Tensor, channels: usize, what: &str) -> Result<usize> {
        let (b, c, h, w) = t.dims4()?;
        let r = self.cfg.resolution;
        if c != channels || h != r || w != r {
            return Err(invalid(format!(
                "{what} has shape {:?}, expected (B, {channels}, {r}, {r})",
                t.dims()
            )));
        }
        Ok(b)
    }

    pub fn forward(&self, inputs: GeneratorInputs) -> Result<GeneratorTensors> {
        let batch = self.check_spatial(inputs.drawable, 1, "drawable region")?;
        if inputs.levels.dims() != [batch] {
            return Err(invalid(format!(
                "levels has shape {:?}, expected ({batch},)",
                inputs.levels.dims()
            )));
        }
        let mut parts = Vec::with_capacity(4);
        if self.cfg.mode == GeneratorMode::Edit {
            let photo = inputs
                .photo_in
                .ok_or_else(|| invalid("edit-mode generator needs the masked photo"))?;
            let mask = inputs
                .mask
                .ok_or_else(|| invalid("edit-mode generator needs the mask"))?;
            if self.check_spatial(photo, 3, "masked photo")? != batch
                || self.check_spatial(mask, 1, "mask")? != batch
            {
                return Err(invalid("batch sizes differ between inputs"));
            }
            parts.extend([photo.clone(), inputs.drawable.clone(), mask.clone()]);
        } else {
            parts.push(inputs.drawable.clone());
        }
        let r = self.cfg.resolution;
        if self.cfg.conditioning == Conditioning::Concat {
            let plane = inputs
                .levels
                .reshape((batch, 1, 1, 1))?
                .broadcast_as((batch, 1, r, r))?
                .contiguous()?;
            parts.push(plane);
        }
        let x = Tensor::cat(&parts, 1)?;

        let styles = match &self.style {
            Some(style) => {
                let code = style.mlp.forward(&inputs.levels.reshape((batch, 1))?)?;
                Some(
                    style
                        .heads
                        .forward_raw(&code)?
                        .into_iter()
                        .map(|(m, s)| Ok((m, s.exp()?)))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            None => None,
        };
        let mut layer = 0usize;
        let mut norm = |h: Tensor| -> Result<Tensor> {
            let out = match &styles {
                Some(s) => adain(&h, &s[layer].0, &s[layer].1)?,
                None => instance_norm(&h)?,
            };
            layer += 1;
            Ok(out)
        };

        let e0 = self.enc0.forward(&x)?.relu()?;
        let e1 = norm(self.enc1.forward(&e0)?)?.relu()?;
        let mut h = norm(self.enc2.forward(&e1)?)?.relu()?;
        for block in &self.blocks {
            let t = norm(block.a.forward(&h)?)?.relu()?;
            let t = norm(block.b.forward(&t)?)?;
            h = (h + t)?;
        }
        let d1 = norm(
            self.dec1
                .forward(&Tensor::cat(&[&upsample2x(&h)?, &e1], 1)?)?,
        )?
        .relu()?;
        let d2 = norm(
            self.dec2
                .forward(&Tensor::cat(&[&upsample2x(&d1)?, &e0], 1)?)?,
        )?
        .relu()?;
        let o = self.out.forward(&d2)?;

        Ok(GeneratorTensors {
            photo: o.narrow(1, 0, 3)?.tanh()?,
            sketch: sigmoid(&o.narrow(1, 3, 1)?)?,
        })
    }

    /// Runs one sample. `photo_in` and `mask` are required in edit mode and
    /// ignored in synthesis mode.
    pub fn forward_single(
        &self,
        photo_in: Option<&Photo>,
        drawable: &SketchMap,
        mask: Option<&Mask>,
        level: RefinementLevel,
    ) -> Result<GeneratorOutput> {
        let dev = self.device().clone();
        let photo_t = photo_in.map(|p| p.to_tensor(&dev)).transpose()?;
        let mask_t = mask.map(|m| m.to_tensor(&dev)).transpose()?;
        let drawable_t = drawable.to_tensor(&dev)?;
        let levels = Tensor::new(&[level.value()], &dev)?.to_dtype(DTYPE)?;
        let out = self.forward(GeneratorInputs {
            photo_in: photo_t.as_ref(),
            drawable: &drawable_t,
            mask: mask_t.as_ref(),
            levels: &levels,
        })?;
        Ok(GeneratorOutput {
            photo: Photo::from_tensor(&out.photo)?,
            sketch: SketchMap::from_tensor(&out.sketch)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(mode: GeneratorMode, conditioning: Conditioning) -> NetworkConfig {
        NetworkConfig {
            resolution: 16,
            base_channels: 4,
            n_resblocks: 1,
            d_style: 8,
            style_hidden_layers: 3,
            discriminator_depth: 0,
            mode,
            conditioning,
        }
    }

    #[test]
    fn norm_layer_count_excludes_first_and_last() {
        let g = Generator::new(
            &tiny(GeneratorMode::Edit, Conditioning::Style),
            1,
            &Device::Cpu,
        )
        .unwrap();
        // enc1, enc2, 2 per res block, dec1, dec2
        assert_eq!(g.norm_channels().len(), 6);
        let bundle = g.style_bundle(RefinementLevel::MAX).unwrap();
        assert_eq!(bundle.per_layer.len(), 6);
        assert_eq!(bundle.global_code.len(), 8);
        for (ls, c) in bundle.per_layer.iter().zip(g.norm_channels()) {
            assert_eq!(ls.mean.len(), c);
        }
    }

    #[test]
    fn rejects_wrong_resolution() {
        let g = Generator::new(
            &tiny(GeneratorMode::Synth, Conditioning::Style),
            1,
            &Device::Cpu,
        )
        .unwrap();
        let s = SketchMap::zeros(8, 8);
        assert!(g
            .forward_single(None, &s, None, RefinementLevel::MAX)
            .is_err());
    }

    #[test]
    fn edit_mode_requires_photo_and_mask() {
        let g = Generator::new(
            &tiny(GeneratorMode::Edit, Conditioning::Style),
            1,
            &Device::Cpu,
        )
        .unwrap();
        let s = SketchMap::zeros(16, 16);
        assert!(g
            .forward_single(None, &s, None, RefinementLevel::MAX)
            .is_err());
    }
}
