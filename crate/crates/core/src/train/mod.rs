//! Renderer pre-training and the staged generator/discriminator schedule.

pub mod adam;
pub mod batch;
pub mod config;
pub mod metrics;
pub mod renderer;
pub mod schedule;

pub use adam::{Adam, AdamConfig};
pub use batch::{build_batch, epoch_order, sample_level, Batch, Phase};
pub use config::{Ablation, DataSource, NetworkPreset, RendererTrainConfig, TrainConfig};
pub use metrics::{read_metrics, StepMetrics};
pub use renderer::{pretrain_renderer, RendererRun, RENDERER_CHECKPOINT, RENDERER_METRICS};
pub use schedule::{
    generator_checkpoint_path, run_schedule, stage_checkpoint_path, StageTrainer, StepLosses,
    TrainReport, METRICS_FILE,
};
