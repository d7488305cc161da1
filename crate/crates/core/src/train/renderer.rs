//! Pre-training of the edge-to-photo renderer: L1 plus a hinge adversarial
//! term against a spectrally normalized discriminator with a score head.

use std::path::{Path, PathBuf};

use candle_core::{Device, Tensor};
use rand::Rng;

use crate::data::{masked_input, PairDataset};
use crate::error::{Error, Result};
use crate::losses::{loss_d_hinge, loss_g_adv};
use crate::morphology::generate_mask;
use crate::nn::{Discriminator, GeneratorMode, Renderer};
use crate::raster::Mask;
use crate::rng::{derive_seed, seeded};
use crate::train::adam::Adam;
use crate::train::config::TrainConfig;
use crate::train::metrics::{MetricsWriter, RendererMetrics, RENDERER_HEADER};

const RENDERER_TAG: u64 = 0x5245_4e44;

pub const RENDERER_CHECKPOINT: &str = "renderer.ckpt";
pub const RENDERER_METRICS: &str = "renderer_metrics.csv";

#[derive(Debug)]
pub struct RendererRun {
    pub renderer: Renderer,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub steps: u64,
}

fn renderer_batch(
    dataset: &PairDataset,
    batch_size: usize,
    mode: GeneratorMode,
    seed: u64,
    device: &Device,
) -> Result<[Tensor; 4]> {
    let r = dataset.resolution();
    let mut rng = seeded(seed);
    let mut parts: [Vec<Tensor>; 4] = Default::default();
    for _ in 0..batch_size {
        let i = rng.random_range(0..dataset.len());
        let mask = match mode {
            GeneratorMode::Edit => generate_mask(r, r, &mut rng)?,
            GeneratorMode::Synth => Mask::ones(r, r),
        };
        let photo = dataset.photo(i);
        parts[0].push(photo.to_tensor(device)?);
        parts[1].push(masked_input(photo, &mask)?.to_tensor(device)?);
        parts[2].push(dataset.edges(i).to_tensor(device)?);
        parts[3].push(mask.to_tensor(device)?);
    }
    let [a, b, c, d] = parts.map(|p| Tensor::cat(&p, 0));
    Ok([a?, b?, c?, d?])
}

fn finite(v: f64, term: &'static str, step: u64, batch_seed: u64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            term,
            step,
            batch_seed,
        })
    }
}

/// Trains a renderer on `dataset` (already at the renderer's resolution) for
/// `cfg.renderer.steps` steps, writing metrics and a checkpoint under
/// `out_dir`.
pub fn pretrain_renderer(
    dataset: &PairDataset,
    cfg: &TrainConfig,
    out_dir: &Path,
    device: &Device,
) -> Result<RendererRun> {
    if dataset.is_empty() {
        return Err(Error::Config(
            "renderer pre-training needs at least one pair".into(),
        ));
    }
    let rcfg = cfg.renderer.network()?;
    if dataset.resolution() != rcfg.resolution {
        return Err(Error::Config(format!(
            "dataset resolution {} differs from renderer resolution {}",
            dataset.resolution(),
            rcfg.resolution
        )));
    }
    let renderer = Renderer::new(&rcfg, derive_seed(cfg.seed, &[RENDERER_TAG, 0]), device)?;
    let disc = Discriminator::new(
        &cfg.network_config(rcfg.resolution)?,
        true,
        derive_seed(cfg.seed, &[RENDERER_TAG, 1]),
        device,
    )?;
    let mut opt_f = Adam::new(renderer.params(), cfg.optimizer)?;
    let mut opt_d = Adam::new(disc.params(), cfg.optimizer)?;
    let w = &cfg.weights;

    let metrics_path = out_dir.join(RENDERER_METRICS);
    let mut metrics = MetricsWriter::create(&metrics_path, RENDERER_HEADER)?;
    for step in 1..=cfg.renderer.steps {
        let batch_seed = derive_seed(cfg.seed, &[RENDERER_TAG, 2, step]);
        let [gt, photo_in, sketch, mask] = renderer_batch(
            dataset,
            cfg.renderer.batch_size,
            cfg.mode,
            batch_seed,
            device,
        )?;
        let out = renderer.forward(&photo_in, &sketch, &mask, true)?;

        disc.power_iterate(1)?;
        let d_fake = disc.forward(&out.detach(), &sketch, &mask)?;
        let d_real = disc.forward(&gt, &sketch, &mask)?;
        let l_d = (loss_d_hinge(&d_fake, &d_real, w.tau_f)? * w.adv_d)?;
        opt_d.step(&l_d.backward()?)?;

        let l1 = (&out - &gt)?.abs()?.mean_all()?;
        let l_adv = loss_g_adv(&disc.forward(&out, &sketch, &mask)?)?;
        let total = ((&l1 * w.rec)? + (&l_adv * w.adv_g)?)?;
        opt_f.step(&total.backward()?)?;

        let row = RendererMetrics {
            step,
            resolution: rcfg.resolution,
            l1: finite(l1.to_scalar()?, "renderer L1", step, batch_seed)?,
            l_g_adv: finite(l_adv.to_scalar()?, "renderer adversarial", step, batch_seed)?,
            l_d: finite(l_d.to_scalar()?, "renderer discriminator", step, batch_seed)?,
            total: finite(total.to_scalar()?, "renderer total", step, batch_seed)?,
        };
        metrics.write_line(&row.to_csv())?;
    }
    metrics.flush()?;

    let checkpoint = out_dir.join(RENDERER_CHECKPOINT);
    renderer
        .to_checkpoint(cfg.renderer.steps)?
        .save(&checkpoint)?;
    Ok(RendererRun {
        renderer,
        checkpoint,
        metrics: metrics_path,
        steps: cfg.renderer.steps,
    })
}
