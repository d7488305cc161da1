use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use sketchrefine::inference::{checkpoints_in_dir, EditRequest, ReturnSet, Session};
use sketchrefine::morphology::{default_max_radius, RoughSketchConfig};
use sketchrefine::nn::GeneratorMode;
use sketchrefine::prepare::{prepare_data, PrepareConfig};
use sketchrefine::service::{serve, CHECKPOINT_DIR_ENV};
use sketchrefine::train::{pretrain_renderer, run_schedule, Ablation, TrainConfig};
use sketchrefine::{Mask, Photo, RefinementLevel, SketchMap};

#[derive(Parser)]
#[command(
    name = "sketchrefine",
    version,
    about = "Level-controlled sketch refinement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export (photo, fine, mask, rough) training triples and a dataset manifest.
    PrepareData {
        /// Directory with photos/ and optional edges/.
        #[arg(long, required_unless_present = "synthetic")]
        data_root: Option<PathBuf>,
        /// Generate this many procedural faces instead of reading a data root.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        #[arg(long, default_value_t = 29_000)]
        train_count: usize,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Maximum dilation radius; defaults to the resolution's standard value.
        #[arg(long)]
        max_radius: Option<f64>,
    },
    /// Pre-train the edge-to-photo renderer only.
    PretrainRenderer {
        #[arg(long)]
        config: PathBuf,
    },
    /// Pre-train the renderer (unless configured), then run the staged schedule.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<GeneratorMode>,
        /// Disable a component; may be repeated.
        #[arg(long)]
        ablate: Vec<Ablation>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Refine a sketch and write refined_sketch.png.
    Refine {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        sketch: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        level: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Edit a photo inside a mask following a sketch.
    Edit {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        photo: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[command(flatten)]
        io: EditIo,
    },
    /// Synthesize a photo from a sketch alone.
    Synth {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        io: EditIo,
    },
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Generator checkpoint; defaults to the newest one under $SKETCHREFINE_CHECKPOINT_DIR.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    renderer_checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct EditIo {
    #[arg(long)]
    sketch: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    level: f64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Outputs to write.
    #[arg(
        long = "return",
        value_delimiter = ',',
        default_value = "refined_sketch,generated_photo,final_photo"
    )]
    returns: Vec<String>,
}

impl ModelArgs {
    fn load(&self) -> anyhow::Result<Session> {
        let (generator, renderer) = match &self.checkpoint {
            Some(g) => (g.clone(), self.renderer_checkpoint.clone()),
            None => {
                let dir = std::env::var_os(CHECKPOINT_DIR_ENV)
                    .with_context(|| format!("pass --checkpoint or set {CHECKPOINT_DIR_ENV}"))?;
                let (g, f) = checkpoints_in_dir(Path::new(&dir))?;
                (g, self.renderer_checkpoint.clone().or(f))
            }
        };
        log::info!("loading {}", generator.display());
        Ok(Session::from_checkpoints(&generator, renderer.as_deref())?)
    }
}

fn run_edit(
    session: &Session,
    mode: GeneratorMode,
    photo: Option<&Path>,
    mask: Option<&Path>,
    io: &EditIo,
) -> anyhow::Result<()> {
    let req = EditRequest {
        photo: photo.map(Photo::load_png).transpose()?,
        mask: mask.map(Mask::load_png).transpose()?,
        sketch: SketchMap::load_png(&io.sketch)?,
        level: RefinementLevel::new(io.level)?,
        mode,
        returns: ReturnSet::from_names(&io.returns)?,
    };
    let resp = session.edit(&req)?;
    std::fs::create_dir_all(&io.out_dir)?;
    if let Some(s) = &resp.refined_sketch {
        s.save_png(io.out_dir.join("refined_sketch.png"))?;
    }
    if let Some(p) = &resp.generated_photo {
        p.save_png(io.out_dir.join("generated_photo.png"))?;
    }
    if let Some(p) = &resp.final_photo {
        p.save_png(io.out_dir.join("final_photo.png"))?;
    }
    println!("radius {}", resp.radius);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::PrepareData {
            data_root,
            synthetic,
            resolution,
            train_count,
            out_dir,
            seed,
            max_radius,
        } => {
            let rough = RoughSketchConfig {
                max_radius: max_radius.unwrap_or_else(|| default_max_radius(resolution)),
                rng_seed: seed,
                ..RoughSketchConfig::for_resolution(resolution)
            };
            let summary = prepare_data(&PrepareConfig {
                data_root,
                synthetic,
                resolution,
                train_count,
                out_dir,
                seed,
                rough,
            })?;
            println!(
                "{} triples, manifest {}",
                summary.records.len(),
                summary.manifest.display()
            );
        }
        Command::PretrainRenderer { config } => {
            let cfg = TrainConfig::load(&config)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let data = cfg.load_dataset(cfg.renderer.resolution)?;
            let run = pretrain_renderer(&data, &cfg, &cfg.output_dir, &candle_core::Device::Cpu)?;
            println!("renderer checkpoint {}", run.checkpoint.display());
        }
        Command::Train {
            config,
            mode,
            ablate,
            output_dir,
        } => {
            let mut cfg = TrainConfig::load(&config)?;
            if let Some(m) = mode {
                cfg.mode = m;
            }
            for a in ablate {
                cfg.apply_ablation(a);
            }
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let report = run_schedule(&cfg)?;
            if report.renderer_checksum_before != report.renderer_checksum_after {
                bail!("renderer parameters changed during generator training");
            }
            for p in &report.generator_checkpoints {
                println!("generator checkpoint {}", p.display());
            }
            println!(
                "metrics {} ({} steps)",
                report.metrics.display(),
                report.steps
            );
        }
        Command::Refine {
            model,
            sketch,
            mask,
            level,
            out_dir,
        } => {
            let session = model.load()?;
            let mask = mask.as_deref().map(Mask::load_png).transpose()?;
            let (refined, radius) = session.refine(
                &SketchMap::load_png(&sketch)?,
                mask.as_ref(),
                RefinementLevel::new(level)?,
            )?;
            std::fs::create_dir_all(&out_dir)?;
            refined.save_png(out_dir.join("refined_sketch.png"))?;
            println!("radius {radius}");
        }
        Command::Edit {
            model,
            photo,
            mask,
            io,
        } => run_edit(
            &model.load()?,
            GeneratorMode::Edit,
            Some(&photo),
            Some(&mask),
            &io,
        )?,
        Command::Synth { model, io } => {
            run_edit(&model.load()?, GeneratorMode::Synth, None, None, &io)?
        }
        Command::Serve { model, port, host } => {
            let session = Arc::new(model.load()?);
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad host/port")?;
            tokio::runtime::Runtime::new()?.block_on(serve(addr, session))?;
        }
    }
    Ok(())
}
