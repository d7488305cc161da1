//! Frozen feature extractors for the perceptual loss.
//!
//! [`Vgg19Taps`] reads torchvision's VGG-19 `features.*` weights from a
//! safetensors file and exposes `relu2_1` and `relu3_1`. When no weights are
//! available, [`RandomConvExtractor`] provides a deterministic two-tap
//! stand-in with the same interface.

use std::path::Path;

use candle_core::{Device, Tensor};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::raster::DTYPE;
use crate::rng::seeded;

/// Maps a `(B, 3, H, W)` photo in `[-1, 1]` to a list of feature maps.
pub trait FeatureExtractor: Send + Sync {
    fn tap_count(&self) -> usize;
    fn features(&self, photo: &Tensor) -> Result<Vec<Tensor>>;
}

/// Single tap returning the input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityExtractor;

impl FeatureExtractor for IdentityExtractor {
    fn tap_count(&self) -> usize {
        1
    }

    fn features(&self, photo: &Tensor) -> Result<Vec<Tensor>> {
        Ok(vec![photo.clone()])
    }
}

#[derive(Debug, Clone)]
struct FixedConv {
    weight: Tensor,
    bias: Tensor,
}

impl FixedConv {
    fn forward(&self, x: &Tensor, stride: usize) -> Result<Tensor> {
        let y = x.conv2d(&self.weight, 1, stride, 1, 1)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, (), 1, 1))?)?)
    }
}

/// Two seeded 3×3 convolutions with tanh activations; the second has
/// stride 2. Smooth everywhere, which keeps finite-difference checks clean.
#[derive(Debug, Clone)]
pub struct RandomConvExtractor {
    convs: [FixedConv; 2],
}

impl RandomConvExtractor {
    pub fn new(seed: u64, device: &Device) -> Result<Self> {
        let mut rng = seeded(seed);
        let mut conv = |in_ch: usize, out_ch: usize| -> Result<FixedConv> {
            let bound = 1.0 / ((in_ch * 9) as f64).sqrt();
            let w: Vec<f64> = (0..out_ch * in_ch * 9)
                .map(|_| rng.random_range(-bound..=bound))
                .collect();
            let b: Vec<f64> = (0..out_ch).map(|_| rng.random_range(-0.1..=0.1)).collect();
            Ok(FixedConv {
                weight: Tensor::from_vec(w, (out_ch, in_ch, 3, 3), device)?,
                bias: Tensor::from_vec(b, out_ch, device)?,
            })
        };
        Ok(Self {
            convs: [conv(3, 8)?, conv(8, 16)?],
        })
    }
}

impl FeatureExtractor for RandomConvExtractor {
    fn tap_count(&self) -> usize {
        2
    }

    fn features(&self, photo: &Tensor) -> Result<Vec<Tensor>> {
        let a = self.convs[0].forward(photo, 1)?.tanh()?;
        let b = self.convs[1].forward(&a, 2)?.tanh()?;
        Ok(vec![a, b])
    }
}

const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// VGG-19 prefix up to `relu3_1`, taps `relu2_1` and `relu3_1`.
#[derive(Debug, Clone)]
pub struct Vgg19Taps {
    // features.0, .2 (block 1), .5, .7 (block 2), .10 (block 3)
    convs: Vec<FixedConv>,
    mean: Tensor,
    std: Tensor,
}

impl Vgg19Taps {
    pub const LAYER_INDICES: [usize; 5] = [0, 2, 5, 7, 10];

    pub fn load(path: impl AsRef<Path>, device: &Device) -> Result<Self> {
        let path = path.as_ref();
        let bad = |reason: String| Error::Ingest {
            path: path.to_path_buf(),
            reason,
        };
        let tensors = candle_core::safetensors::load(path, device)?;
        let expected = [(3, 64), (64, 64), (64, 128), (128, 128), (128, 256)];
        let mut convs = Vec::with_capacity(5);
        for (&idx, &(in_ch, out_ch)) in Self::LAYER_INDICES.iter().zip(&expected) {
            let get = |suffix: &str| {
                let key = format!("features.{idx}.{suffix}");
                tensors
                    .get(&key)
                    .ok_or_else(|| bad(format!("missing tensor {key}")))
                    .and_then(|t| Ok(t.to_dtype(DTYPE)?))
            };
            let weight = get("weight")?;
            let bias = get("bias")?;
            if weight.dims() != [out_ch, in_ch, 3, 3] || bias.dims() != [out_ch] {
                return Err(bad(format!(
                    "features.{idx} has shape {:?}, expected ({out_ch}, {in_ch}, 3, 3)",
                    weight.dims()
                )));
            }
            convs.push(FixedConv { weight, bias });
        }
        Ok(Self {
            convs,
            mean: Tensor::new(&IMAGENET_MEAN, device)?.reshape((1, 3, 1, 1))?,
            std: Tensor::new(&IMAGENET_STD, device)?.reshape((1, 3, 1, 1))?,
        })
    }
}

impl FeatureExtractor for Vgg19Taps {
    fn tap_count(&self) -> usize {
        2
    }

    fn features(&self, photo: &Tensor) -> Result<Vec<Tensor>> {
        if photo.dim(1)? != 3 {
            return Err(invalid("VGG features expect 3-channel photos"));
        }
        let unit = ((photo + 1.0)? * 0.5)?;
        let x = unit.broadcast_sub(&self.mean)?.broadcast_div(&self.std)?;
        let c = &self.convs;
        let x = c[0].forward(&x, 1)?.relu()?;
        let x = c[1].forward(&x, 1)?.relu()?.max_pool2d(2)?;
        let relu2_1 = c[2].forward(&x, 1)?.relu()?;
        let x = c[3].forward(&relu2_1, 1)?.relu()?.max_pool2d(2)?;
        let relu3_1 = c[4].forward(&x, 1)?.relu()?;
        Ok(vec![relu2_1, relu3_1])
    }
}

/// Perceptual feature source chosen from configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerceptualSource {
    /// Pretrained VGG-19 weights in safetensors format.
    Vgg19 { weights: std::path::PathBuf },
    /// Seeded random convolutions.
    Random { seed: u64 },
}

impl Default for PerceptualSource {
    fn default() -> Self {
        PerceptualSource::Random { seed: 0 }
    }
}

impl PerceptualSource {
    pub fn build(&self, device: &Device) -> Result<Box<dyn FeatureExtractor>> {
        Ok(match self {
            PerceptualSource::Vgg19 { weights } => Box::new(Vgg19Taps::load(weights, device)?),
            PerceptualSource::Random { seed } => Box::new(RandomConvExtractor::new(*seed, device)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_extractor_shapes_and_determinism() {
        let x = Tensor::randn(0.0f64, 0.5, (2, 3, 8, 8), &Device::Cpu).unwrap();
        let a = RandomConvExtractor::new(1, &Device::Cpu).unwrap();
        let fa = a.features(&x).unwrap();
        assert_eq!(fa[0].dims(), &[2, 8, 8, 8]);
        assert_eq!(fa[1].dims(), &[2, 16, 4, 4]);
        let fb = RandomConvExtractor::new(1, &Device::Cpu)
            .unwrap()
            .features(&x)
            .unwrap();
        let diff = (&fa[1] - &fb[1]).unwrap().abs().unwrap().sum_all().unwrap();
        assert_eq!(diff.to_scalar::<f64>().unwrap(), 0.0);
    }

    #[test]
    fn missing_vgg_file_is_an_error() {
        assert!(Vgg19Taps::load("/nonexistent/vgg.safetensors", &Device::Cpu).is_err());
    }
}
