//! Training objectives for the refinement generator and its discriminator.
//!
//! All reductions are per-element means, so weights do not depend on the
//! working resolution. Every function returns a scalar tensor so it can be
//! differentiated.

pub mod features;

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use features::{
    FeatureExtractor, IdentityExtractor, PerceptualSource, RandomConvExtractor, Vgg19Taps,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub rec: f64,
    pub perc: f64,
    pub adv_g: f64,
    pub adv_d: f64,
    /// Hinge margin for the discriminator paired with the generator.
    pub tau_g: f64,
    /// Hinge margin for the discriminator used while pre-training the renderer.
    pub tau_f: f64,
    /// Per-tap perceptual weights.
    pub layer_weights: Vec<f64>,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            rec: 100.0,
            perc: 1.0,
            adv_g: 1.0,
            adv_d: 1.0,
            tau_g: 10.0,
            tau_f: 1.0,
            layer_weights: vec![1.0, 0.5],
        }
    }
}

impl LossWeights {
    pub fn validate(&self, taps: usize) -> Result<()> {
        let all = [
            self.rec, self.perc, self.adv_g, self.adv_d, self.tau_g, self.tau_f,
        ];
        if all.iter().chain(&self.layer_weights).any(|w| !(*w >= 0.0)) {
            return Err(invalid("loss weights and margins must be >= 0"));
        }
        if self.layer_weights.len() != taps {
            return Err(invalid(format!(
                "{} perceptual layer weights for {taps} feature taps",
                self.layer_weights.len()
            )));
        }
        Ok(())
    }
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(invalid(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

fn mean_abs_diff(a: &Tensor, b: &Tensor, what: &str) -> Result<Tensor> {
    same_shape(a, b, what)?;
    Ok((a - b)?.abs()?.mean_all()?)
}

fn mean_sq_diff(a: &Tensor, b: &Tensor, what: &str) -> Result<Tensor> {
    same_shape(a, b, what)?;
    Ok((a - b)?.sqr()?.mean_all()?)
}

/// L1 reconstruction: `|I_gen - I_gt| + |S_gen - S_gt| (+ |I_out - I_gt|)`.
/// Pass `photo_out = None` where the renderer term is not computed.
pub fn loss_rec(
    photo_gen: &Tensor,
    sketch_gen: &Tensor,
    photo_out: Option<&Tensor>,
    photo_gt: &Tensor,
    sketch_gt: &Tensor,
) -> Result<Tensor> {
    let mut total = (mean_abs_diff(photo_gen, photo_gt, "generated photo")?
        + mean_abs_diff(sketch_gen, sketch_gt, "generated sketch")?)?;
    if let Some(out) = photo_out {
        total = (total + mean_abs_diff(out, photo_gt, "rendered photo")?)?;
    }
    Ok(total)
}

/// Perceptual loss: `Σ_i λ_i (‖Φ_i(I_gen) − Φ_i(I_gt)‖² + ‖Φ_i(I_out) − Φ_i(I_gt)‖²)`,
/// each squared norm a per-element mean.
pub fn loss_perc(
    photo_gen: &Tensor,
    photo_out: Option<&Tensor>,
    photo_gt: &Tensor,
    extractor: &dyn FeatureExtractor,
    layer_weights: &[f64],
) -> Result<Tensor> {
    if layer_weights.len() != extractor.tap_count() {
        return Err(invalid(format!(
            "{} layer weights for {} feature taps",
            layer_weights.len(),
            extractor.tap_count()
        )));
    }
    same_shape(photo_gen, photo_gt, "generated photo")?;
    let target = extractor
        .features(photo_gt)?
        .into_iter()
        .map(|t| t.detach())
        .collect::<Vec<_>>();
    let mut preds = vec![extractor.features(photo_gen)?];
    if let Some(out) = photo_out {
        same_shape(out, photo_gt, "rendered photo")?;
        preds.push(extractor.features(out)?);
    }
    let mut total = Tensor::zeros((), photo_gt.dtype(), photo_gt.device())?;
    for feats in &preds {
        for ((f, t), &w) in feats.iter().zip(&target).zip(layer_weights) {
            if w != 0.0 {
                total = (total + (mean_sq_diff(f, t, "feature tap")? * w)?)?;
            }
        }
    }
    Ok(total)
}

/// Generator hinge objective: `-mean(D(fake))`.
pub fn loss_g_adv(fake_scores: &Tensor) -> Result<Tensor> {
    Ok(fake_scores.mean_all()?.neg()?)
}

/// Discriminator hinge objective: `mean ReLU(τ + fake) + mean ReLU(τ − real)`.
/// The expectation runs over patches and batch.
pub fn loss_d_hinge(fake_scores: &Tensor, real_scores: &Tensor, tau: f64) -> Result<Tensor> {
    let fake = (fake_scores + tau)?.relu()?.mean_all()?;
    let real = (real_scores.neg()? + tau)?.relu()?.mean_all()?;
    Ok((fake + real)?)
}

/// Unweighted generator loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneratorLossParts {
    pub rec: f64,
    pub perc: f64,
    pub adv: f64,
}

/// `w_rec·L_rec + w_perc·L_perc + w_adv_G·L_G`.
pub fn total_g_objective(parts: &GeneratorLossParts, w: &LossWeights) -> f64 {
    w.rec * parts.rec + w.perc * parts.perc + w.adv_g * parts.adv
}

/// Tensor form of [`total_g_objective`] for back-propagation.
pub fn total_g_objective_tensor(
    rec: &Tensor,
    perc: &Tensor,
    adv: &Tensor,
    w: &LossWeights,
) -> Result<Tensor> {
    Ok(((rec * w.rec)? + (perc * w.perc)? + (adv * w.adv_g)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn full(v: f64, shape: &[usize]) -> Tensor {
        Tensor::full(v, shape, &Device::Cpu).unwrap()
    }

    fn scalar(t: Tensor) -> f64 {
        t.to_scalar::<f64>().unwrap()
    }

    #[test]
    fn rec_values() {
        let gt = Tensor::randn(0.0f64, 0.5, (1, 3, 4, 4), &Device::Cpu).unwrap();
        let sgt = full(0.25, &[1, 1, 4, 4]);
        assert_eq!(
            scalar(loss_rec(&gt, &sgt, Some(&gt), &gt, &sgt).unwrap()),
            0.0
        );

        let off = (&gt + 0.5).unwrap();
        let soff = (&sgt + 0.5).unwrap();
        let v = scalar(loss_rec(&off, &soff, Some(&off), &gt, &sgt).unwrap());
        assert!((v - 1.5).abs() < 1e-12);

        let v = scalar(loss_rec(&off, &sgt, None, &gt, &sgt).unwrap());
        assert!((v - 0.5).abs() < 1e-12);

        assert!(loss_rec(&gt, &sgt, None, &gt, &full(0.0, &[1, 1, 4, 5])).is_err());
    }

    #[test]
    fn perc_values() {
        let gt = Tensor::randn(0.0f64, 0.5, (1, 3, 4, 4), &Device::Cpu).unwrap();
        let fx = RandomConvExtractor::new(7, &Device::Cpu).unwrap();
        assert_eq!(
            scalar(loss_perc(&gt, Some(&gt), &gt, &fx, &[1.0, 0.5]).unwrap()),
            0.0
        );
        let other = (&gt * 2.0).unwrap();
        assert_eq!(
            scalar(loss_perc(&other, Some(&other), &gt, &fx, &[0.0, 0.0]).unwrap()),
            0.0
        );

        let id = IdentityExtractor;
        let shifted = (&gt + 0.1).unwrap();
        let v = scalar(loss_perc(&shifted, None, &gt, &id, &[1.0]).unwrap());
        assert!((v - 0.01).abs() < 1e-12);
        assert!(loss_perc(&shifted, None, &gt, &id, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn adversarial_values() {
        assert_eq!(scalar(loss_g_adv(&full(0.0, &[2, 1, 3, 3])).unwrap()), 0.0);
        assert_eq!(scalar(loss_g_adv(&full(2.0, &[2, 1, 3, 3])).unwrap()), -2.0);
        let mixed = Tensor::new(&[1.0f64, -1.0, 1.0, -1.0], &Device::Cpu).unwrap();
        assert_eq!(scalar(loss_g_adv(&mixed).unwrap()), 0.0);

        let s = [2, 1, 3, 3];
        assert_eq!(
            scalar(loss_d_hinge(&full(-1.0, &s), &full(1.0, &s), 1.0).unwrap()),
            0.0
        );
        assert_eq!(
            scalar(loss_d_hinge(&full(0.0, &s), &full(0.0, &s), 1.0).unwrap()),
            2.0
        );
        assert_eq!(
            scalar(loss_d_hinge(&full(-20.0, &s), &full(20.0, &s), 10.0).unwrap()),
            0.0
        );
    }

    #[test]
    fn total_objective_is_linear_in_weights() {
        let w = LossWeights::default();
        assert_eq!(total_g_objective(&GeneratorLossParts::default(), &w), 0.0);
        let ones = GeneratorLossParts {
            rec: 1.0,
            perc: 1.0,
            adv: 1.0,
        };
        assert_eq!(total_g_objective(&ones, &w), 102.0);
        let doubled = LossWeights {
            rec: 2.0 * w.rec,
            ..w.clone()
        };
        let parts = GeneratorLossParts {
            rec: 0.3,
            perc: 0.7,
            adv: -0.2,
        };
        let delta = total_g_objective(&parts, &doubled) - total_g_objective(&parts, &w);
        assert!((delta - w.rec * parts.rec).abs() < 1e-12);
    }

    #[test]
    fn weights_validation() {
        let w = LossWeights::default();
        assert!(w.validate(2).is_ok());
        assert!(w.validate(3).is_err());
        let bad = LossWeights {
            perc: -1.0,
            ..LossWeights::default()
        };
        assert!(bad.validate(2).is_err());
    }
}
