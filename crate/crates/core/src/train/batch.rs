//! Training batches: per-sample masks, levels and drawable regions, each
//! derived from its own seed so a batch depends only on `(seed, stage, step)`.

use candle_core::{Device, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{masked_input, PairDataset};
use crate::error::Result;
use crate::morphology::{generate_mask, make_drawable_region, RoughSketchConfig};
use crate::nn::GeneratorMode;
use crate::raster::{Mask, RefinementLevel, DTYPE};
use crate::rng::{derive_seed, seeded, SeededRng};

/// Curriculum phase: `ℓ = 1` exactly, or `ℓ ~ U[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Fixed,
    Uniform,
}

impl Phase {
    pub fn number(self) -> u8 {
        match self {
            Phase::Fixed => 1,
            Phase::Uniform => 2,
        }
    }
}

pub fn sample_level(phase: Phase, rng: &mut SeededRng) -> RefinementLevel {
    match phase {
        Phase::Fixed => RefinementLevel::MAX,
        Phase::Uniform => RefinementLevel::new(rng.random_range(0.0..=1.0)).expect("in range"),
    }
}

/// Seeded permutation of `0..n` for one epoch.
pub fn epoch_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    order
}

/// Stacked tensors for one step.
#[derive(Debug, Clone)]
pub struct Batch {
    pub photo_gt: Tensor,
    pub sketch_gt: Tensor,
    pub photo_in: Tensor,
    pub drawable: Tensor,
    pub mask: Tensor,
    pub levels: Tensor,
    pub level_values: Vec<f64>,
}

/// Builds a batch from dataset indices. Sample `k` draws its mask, level and
/// deformation from `derive_seed(batch_seed, [k])`.
pub fn build_batch(
    dataset: &PairDataset,
    indices: &[usize],
    phase: Phase,
    rough: &RoughSketchConfig,
    mode: GeneratorMode,
    batch_seed: u64,
    device: &Device,
) -> Result<Batch> {
    let r = dataset.resolution();
    let n = indices.len();
    let mut photo_gt = Vec::with_capacity(n);
    let mut sketch_gt = Vec::with_capacity(n);
    let mut photo_in = Vec::with_capacity(n);
    let mut drawable = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    let mut level_values = Vec::with_capacity(n);
    for (k, &i) in indices.iter().enumerate() {
        let mut rng = seeded(derive_seed(batch_seed, &[k as u64]));
        let level = sample_level(phase, &mut rng);
        let mask = match mode {
            GeneratorMode::Edit => generate_mask(r, r, &mut rng)?,
            GeneratorMode::Synth => Mask::ones(r, r),
        };
        let region = make_drawable_region(dataset.edges(i), level, rough, &mut rng, true)?;
        let photo = dataset.photo(i);
        photo_gt.push(photo.to_tensor(device)?);
        sketch_gt.push(dataset.edges(i).to_tensor(device)?);
        photo_in.push(masked_input(photo, &mask)?.to_tensor(device)?);
        drawable.push(region.masked(&mask)?.to_tensor(device)?);
        masks.push(mask.to_tensor(device)?);
        level_values.push(level.value());
    }
    Ok(Batch {
        photo_gt: Tensor::cat(&photo_gt, 0)?,
        sketch_gt: Tensor::cat(&sketch_gt, 0)?,
        photo_in: Tensor::cat(&photo_in, 0)?,
        drawable: Tensor::cat(&drawable, 0)?,
        mask: Tensor::cat(&masks, 0)?,
        levels: Tensor::new(level_values.as_slice(), device)?.to_dtype(DTYPE)?,
        level_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_faces;

    #[test]
    fn fixed_phase_always_uses_level_one() {
        let mut rng = seeded(1);
        assert!((0..100).all(|_| sample_level(Phase::Fixed, &mut rng) == RefinementLevel::MAX));
    }

    #[test]
    fn batches_are_reproducible() {
        let ds = synthetic_faces(3, 32, 0).unwrap();
        let rough = RoughSketchConfig::for_resolution(32);
        let make = || {
            build_batch(
                &ds,
                &[2, 0],
                Phase::Uniform,
                &rough,
                GeneratorMode::Edit,
                99,
                &Device::Cpu,
            )
            .unwrap()
        };
        let (a, b) = (make(), make());
        assert_eq!(a.level_values, b.level_values);
        assert_eq!(a.drawable.dims(), &[2, 1, 32, 32]);
        let diff = (&a.drawable - &b.drawable)
            .unwrap()
            .abs()
            .unwrap()
            .sum_all()
            .unwrap();
        assert_eq!(diff.to_scalar::<f64>().unwrap(), 0.0);
    }

    #[test]
    fn synth_batches_use_full_masks() {
        let ds = synthetic_faces(1, 32, 0).unwrap();
        let rough = RoughSketchConfig::for_resolution(32);
        let b = build_batch(
            &ds,
            &[0],
            Phase::Fixed,
            &rough,
            GeneratorMode::Synth,
            1,
            &Device::Cpu,
        )
        .unwrap();
        let m = b.mask.sum_all().unwrap().to_scalar::<f64>().unwrap();
        assert_eq!(m, 32.0 * 32.0);
    }

    #[test]
    fn epoch_order_is_a_permutation() {
        let mut o = epoch_order(10, 5);
        assert_eq!(o, epoch_order(10, 5));
        o.sort_unstable();
        assert_eq!(o, (0..10).collect::<Vec<_>>());
    }
}
