//! Generator/discriminator training across resolution stages.
//!
//! Every stage builds a fresh generator and discriminator at its resolution,
//! trains `epochs_phase1` epochs at `ℓ = 1` and then `epochs_phase2` epochs
//! with uniformly sampled levels. Batches are derived from
//! `(seed, stage, step)`, so a resumed run reproduces the uninterrupted one.

use std::path::{Path, PathBuf};

use candle_core::Device;
use serde_json::json;

use crate::data::PairDataset;
use crate::error::{Error, Result};
use crate::losses::{
    loss_d_hinge, loss_g_adv, loss_perc, loss_rec, total_g_objective_tensor, FeatureExtractor,
    LossWeights,
};
use crate::nn::{Checkpoint, Discriminator, Generator, GeneratorInputs, NetworkConfig, Renderer};
use crate::rng::derive_seed;
use crate::train::adam::{Adam, AdamConfig};
use crate::train::batch::{build_batch, epoch_order, Batch, Phase};
use crate::train::config::TrainConfig;
use crate::train::metrics::{MetricsWriter, StepMetrics, GENERATOR_HEADER};
use crate::train::renderer::{pretrain_renderer, RENDERER_CHECKPOINT};

const STAGE_TAG: u64 = 0x5354_4147;
const STAGE_KIND: &str = "stage";

pub const METRICS_FILE: &str = "metrics.csv";

/// Unweighted loss values of one step, plus the weighted generator total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub l_rec: f64,
    pub l_perc: f64,
    pub l_g_adv: f64,
    pub l_d: f64,
    pub total_g: f64,
}

/// Owns the trainable networks of one stage.
pub struct StageTrainer<'a> {
    pub generator: Generator,
    pub discriminator: Discriminator,
    opt_g: Adam,
    opt_d: Adam,
    renderer: Option<&'a Renderer>,
    extractor: &'a dyn FeatureExtractor,
    weights: LossWeights,
}

impl<'a> StageTrainer<'a> {
    /// `renderer` is the frozen renderer whose output enters the generator
    /// objective; pass `None` to leave those terms out.
    pub fn new(
        net: &NetworkConfig,
        seed: u64,
        optimizer: AdamConfig,
        weights: LossWeights,
        renderer: Option<&'a Renderer>,
        extractor: &'a dyn FeatureExtractor,
        device: &Device,
    ) -> Result<Self> {
        if let Some(f) = renderer {
            if f.config().resolution != net.resolution {
                return Err(Error::Config(format!(
                    "renderer resolution {} differs from stage resolution {}",
                    f.config().resolution,
                    net.resolution
                )));
            }
        }
        weights.validate(extractor.tap_count())?;
        let generator = Generator::new(net, derive_seed(seed, &[0]), device)?;
        let discriminator = Discriminator::new(net, false, derive_seed(seed, &[1]), device)?;
        Ok(Self {
            opt_g: Adam::new(generator.params(), optimizer)?,
            opt_d: Adam::new(discriminator.params(), optimizer)?,
            generator,
            discriminator,
            renderer,
            extractor,
            weights,
        })
    }

    /// One discriminator update on the hinge loss, then one generator update
    /// on the weighted objective. The renderer is only read.
    pub fn train_step(&mut self, batch: &Batch, step: u64, batch_seed: u64) -> Result<StepLosses> {
        let w = &self.weights;
        let gen = self.generator.forward(GeneratorInputs {
            photo_in: Some(&batch.photo_in),
            drawable: &batch.drawable,
            mask: Some(&batch.mask),
            levels: &batch.levels,
        })?;

        let d = &self.discriminator;
        d.power_iterate(1)?;
        let d_fake = d.forward(&gen.photo.detach(), &gen.sketch.detach(), &batch.mask)?;
        let d_real = d.forward(&batch.photo_gt, &batch.sketch_gt, &batch.mask)?;
        let l_d_raw = loss_d_hinge(&d_fake, &d_real, w.tau_g)?;
        self.opt_d.step(&(&l_d_raw * w.adv_d)?.backward()?)?;

        let photo_out = match self.renderer {
            Some(f) => Some(f.forward(&batch.photo_in, &gen.sketch, &batch.mask, false)?),
            None => None,
        };
        let l_rec = loss_rec(
            &gen.photo,
            &gen.sketch,
            photo_out.as_ref(),
            &batch.photo_gt,
            &batch.sketch_gt,
        )?;
        let l_perc = loss_perc(
            &gen.photo,
            photo_out.as_ref(),
            &batch.photo_gt,
            self.extractor,
            &w.layer_weights,
        )?;
        let l_adv = loss_g_adv(&self.discriminator.forward(
            &gen.photo,
            &gen.sketch,
            &batch.mask,
        )?)?;
        let total = total_g_objective_tensor(&l_rec, &l_perc, &l_adv, w)?;

        let check = |v: f64, term: &'static str| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite {
                    term,
                    step,
                    batch_seed,
                })
            }
        };
        let losses = StepLosses {
            l_rec: check(l_rec.to_scalar()?, "reconstruction")?,
            l_perc: check(l_perc.to_scalar()?, "perceptual")?,
            l_g_adv: check(l_adv.to_scalar()?, "generator adversarial")?,
            l_d: check(l_d_raw.to_scalar()?, "discriminator hinge")?,
            total_g: check(total.to_scalar()?, "generator total")?,
        };
        self.opt_g.step(&total.backward()?)?;
        Ok(losses)
    }

    fn to_checkpoint(&self, meta: serde_json::Value) -> Result<Checkpoint> {
        let mut ckpt =
            Checkpoint::new(STAGE_KIND, self.generator.config(), self.opt_g.step_count())?
                .with_tensors("g.", self.generator.params().named_tensors())
                .with_tensors("d.", self.discriminator.params().named_tensors())
                .with_tensors("opt_g.", self.opt_g.state_tensors())
                .with_tensors("opt_d.", self.opt_d.state_tensors());
        ckpt.meta = meta;
        Ok(ckpt)
    }

    fn restore(&mut self, ckpt: &Checkpoint) -> Result<()> {
        ckpt.expect_kind(STAGE_KIND)?;
        self.generator.params().load_named(&ckpt.section("g."))?;
        self.discriminator
            .params()
            .load_named(&ckpt.section("d."))?;
        let opt_step = |key: &str| {
            ckpt.meta[key]
                .as_u64()
                .ok_or_else(|| Error::Checkpoint(format!("stage checkpoint lacks {key}")))
        };
        self.opt_g
            .load_state(opt_step("opt_g_step")?, &ckpt.section("opt_g."))?;
        self.opt_d
            .load_state(opt_step("opt_d_step")?, &ckpt.section("opt_d."))?;
        Ok(())
    }
}

/// Outcome of [`run_schedule`].
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub metrics: PathBuf,
    pub renderer_checkpoint: PathBuf,
    /// Exported generator per finished stage, in stage order.
    pub generator_checkpoints: Vec<PathBuf>,
    /// Global step reached (equals the scheduled total when `completed`).
    pub steps: u64,
    pub completed: bool,
    pub renderer_checksum_before: u64,
    pub renderer_checksum_after: u64,
}

pub fn stage_checkpoint_path(dir: &Path, resolution: usize) -> PathBuf {
    dir.join(format!("stage_{resolution}.ckpt"))
}

pub fn generator_checkpoint_path(dir: &Path, resolution: usize) -> PathBuf {
    dir.join(format!("generator_{resolution}.ckpt"))
}

struct StagePlan {
    index: usize,
    resolution: usize,
    steps_per_epoch: u64,
    total_steps: u64,
    first_global_step: u64,
}

fn plan_stages(cfg: &TrainConfig, n: usize) -> Vec<StagePlan> {
    let steps_per_epoch = n.div_ceil(cfg.batch_size) as u64;
    let total_steps = steps_per_epoch * (cfg.epochs_phase1 + cfg.epochs_phase2) as u64;
    cfg.resolutions
        .iter()
        .enumerate()
        .map(|(index, &resolution)| StagePlan {
            index,
            resolution,
            steps_per_epoch,
            total_steps,
            first_global_step: index as u64 * total_steps,
        })
        .collect()
}

fn load_or_train_renderer(
    cfg: &TrainConfig,
    out_dir: &Path,
    device: &Device,
) -> Result<(Renderer, PathBuf)> {
    if let Some(path) = &cfg.renderer.checkpoint {
        let f = Renderer::from_checkpoint(&Checkpoint::load(path, device)?, device)?;
        return Ok((f, path.clone()));
    }
    let own = out_dir.join(RENDERER_CHECKPOINT);
    if own.exists() {
        let f = Renderer::from_checkpoint(&Checkpoint::load(&own, device)?, device)?;
        return Ok((f, own));
    }
    let dataset = cfg.load_dataset(cfg.renderer.resolution)?;
    log::info!(
        "pre-training renderer at {}px for {} steps",
        cfg.renderer.resolution,
        cfg.renderer.steps
    );
    let run = pretrain_renderer(&dataset, cfg, out_dir, device)?;
    Ok((run.renderer, run.checkpoint))
}

/// Global step recorded in the most advanced stage checkpoint, if any.
fn resume_point(cfg: &TrainConfig, out_dir: &Path, device: &Device) -> Result<u64> {
    let mut reached = 0;
    for &r in &cfg.resolutions {
        let path = stage_checkpoint_path(out_dir, r);
        if path.exists() {
            let ckpt = Checkpoint::load(&path, device)?;
            reached = reached.max(ckpt.meta["global_step"].as_u64().unwrap_or(0));
        }
    }
    Ok(reached)
}

/// Pre-trains (or loads) the renderer, then trains one generator per stage.
/// Re-running with the same `output_dir` resumes from the latest checkpoints.
pub fn run_schedule(cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let device = Device::Cpu;
    let out_dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(
        out_dir.join("config.toml"),
        toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?,
    )?;

    let (renderer, renderer_checkpoint) = load_or_train_renderer(cfg, &out_dir, &device)?;
    let checksum_before = renderer.params().checksum()?;
    let extractor = cfg.perceptual.build(&device)?;

    let resume_from = resume_point(cfg, &out_dir, &device)?;
    let metrics_path = out_dir.join(METRICS_FILE);
    let mut metrics = MetricsWriter::resume(&metrics_path, GENERATOR_HEADER, resume_from)?;

    let base = cfg.load_dataset(cfg.target_resolution())?;
    let plans = plan_stages(cfg, base.len());
    let mut report = TrainReport {
        metrics: metrics_path,
        renderer_checkpoint,
        generator_checkpoints: Vec::new(),
        steps: resume_from,
        completed: false,
        renderer_checksum_before: checksum_before,
        renderer_checksum_after: checksum_before,
    };

    for plan in &plans {
        let stopped = run_stage(
            cfg,
            plan,
            &base,
            &renderer,
            extractor.as_ref(),
            &mut metrics,
            &mut report,
            &device,
        )?;
        metrics.flush()?;
        if stopped {
            report.renderer_checksum_after = renderer.params().checksum()?;
            return Ok(report);
        }
    }
    report.completed = true;
    report.renderer_checksum_after = renderer.params().checksum()?;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    cfg: &TrainConfig,
    plan: &StagePlan,
    base: &PairDataset,
    renderer: &Renderer,
    extractor: &dyn FeatureExtractor,
    metrics: &mut MetricsWriter,
    report: &mut TrainReport,
    device: &Device,
) -> Result<bool> {
    let out_dir = &cfg.output_dir;
    let res = plan.resolution;
    let net = cfg.network_config(res)?;
    let rough = cfg.rough_config(res);
    let use_renderer = cfg.adaptation && res == renderer.config().resolution;
    let stage_seed = derive_seed(cfg.seed, &[STAGE_TAG, plan.index as u64]);
    let mut trainer = StageTrainer::new(
        &net,
        stage_seed,
        cfg.optimizer,
        cfg.weights.clone(),
        use_renderer.then_some(renderer),
        extractor,
        device,
    )?;

    let stage_path = stage_checkpoint_path(out_dir, res);
    let mut done = 0u64;
    if stage_path.exists() {
        let ckpt = Checkpoint::load(&stage_path, device)?;
        trainer.restore(&ckpt)?;
        done = ckpt.meta["stage_step"].as_u64().unwrap_or(0);
        log::info!("resuming {res}px stage at step {done}/{}", plan.total_steps);
    }

    let save_stage = |trainer: &StageTrainer, stage_step: u64| -> Result<()> {
        trainer
            .to_checkpoint(json!({
                "stage_step": stage_step,
                "global_step": plan.first_global_step + stage_step,
                "opt_g_step": trainer.opt_g.step_count(),
                "opt_d_step": trainer.opt_d.step_count(),
            }))?
            .save(&stage_path)
    };
    let export = |trainer: &StageTrainer, stage_step: u64| -> Result<PathBuf> {
        let path = generator_checkpoint_path(out_dir, res);
        trainer
            .generator
            .to_checkpoint(stage_step, json!({ "max_radius": rough.max_radius }))?
            .save(&path)?;
        Ok(path)
    };

    if done < plan.total_steps {
        let dataset = base.resampled(res)?;
        let epochs = cfg.epochs_phase1 + cfg.epochs_phase2;
        let mut stage_step = 0u64;
        'epochs: for epoch in 0..epochs {
            let phase = if epoch < cfg.epochs_phase1 || cfg.single_level {
                Phase::Fixed
            } else {
                Phase::Uniform
            };
            if stage_step + plan.steps_per_epoch <= done {
                stage_step += plan.steps_per_epoch;
                continue;
            }
            let order = epoch_order(
                dataset.len(),
                derive_seed(stage_seed, &[0x45_50_4f_43, epoch as u64]),
            );
            for indices in order.chunks(cfg.batch_size) {
                stage_step += 1;
                if stage_step <= done {
                    continue;
                }
                let global = plan.first_global_step + stage_step;
                let batch_seed = derive_seed(stage_seed, &[global]);
                let batch = build_batch(
                    &dataset, indices, phase, &rough, cfg.mode, batch_seed, device,
                )?;
                let l = trainer.train_step(&batch, global, batch_seed)?;
                let level_mean =
                    batch.level_values.iter().sum::<f64>() / batch.level_values.len() as f64;
                metrics.write_line(
                    &StepMetrics {
                        step: global,
                        resolution: res,
                        phase: phase.number(),
                        level_mean,
                        l_rec: l.l_rec,
                        l_perc: l.l_perc,
                        l_g_adv: l.l_g_adv,
                        l_d: l.l_d,
                        total_g: l.total_g,
                    }
                    .to_csv(),
                )?;
                report.steps = global;
                let stop = cfg.stop_after_steps.is_some_and(|s| global >= s);
                if stop || (cfg.checkpoint_every > 0 && global.is_multiple_of(cfg.checkpoint_every))
                {
                    metrics.flush()?;
                    save_stage(&trainer, stage_step)?;
                }
                if stop && stage_step < plan.total_steps {
                    log::info!("stopping at global step {global} as configured");
                    return Ok(true);
                }
                if stage_step == plan.total_steps {
                    break 'epochs;
                }
            }
        }
        done = plan.total_steps;
    }
    save_stage(&trainer, done)?;
    report.generator_checkpoints.push(export(&trainer, done)?);
    report.steps = report.steps.max(plan.first_global_step + done);
    Ok(cfg.stop_after_steps.is_some_and(|s| report.steps >= s)
        && plan.index + 1 < cfg.resolutions.len())
}
