//! Networks: the level-conditioned refinement generator, the patch
//! discriminator, and the edge-to-photo renderer.

pub mod checkpoint;
pub mod config;
pub mod discriminator;
pub mod generator;
pub mod layers;
pub mod params;
pub mod renderer;
pub mod spectral;
pub mod style;

use candle_core::Device;

pub use checkpoint::Checkpoint;
pub use config::{discriminator_depth_for, Conditioning, GeneratorMode, NetworkConfig};
pub use discriminator::Discriminator;
pub use generator::{Generator, GeneratorInputs, GeneratorOutput, GeneratorTensors};
pub use params::ParamStore;
pub use renderer::{composite, Renderer, RendererConfig};
pub use style::{LayerStyle, StyleBundle};

use crate::error::Result;

pub const GENERATOR_KIND: &str = "generator";
pub const RENDERER_KIND: &str = "renderer";

impl Generator {
    pub fn to_checkpoint(&self, step: u64, meta: serde_json::Value) -> Result<Checkpoint> {
        let mut ckpt = Checkpoint::new(GENERATOR_KIND, self.config(), step)?
            .with_tensors("", self.params().named_tensors());
        ckpt.meta = meta;
        Ok(ckpt)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, device: &Device) -> Result<Self> {
        ckpt.expect_kind(GENERATOR_KIND)?;
        let cfg: NetworkConfig = ckpt.config_as()?;
        let g = Generator::new(&cfg, 0, device)?;
        g.params().load_named(&ckpt.section(""))?;
        Ok(g)
    }
}

impl Renderer {
    pub fn to_checkpoint(&self, step: u64) -> Result<Checkpoint> {
        Ok(Checkpoint::new(RENDERER_KIND, self.config(), step)?
            .with_tensors("", self.params().named_tensors()))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, device: &Device) -> Result<Self> {
        ckpt.expect_kind(RENDERER_KIND)?;
        let cfg: RendererConfig = ckpt.config_as()?;
        let r = Renderer::new(&cfg, 0, device)?;
        r.params().load_named(&ckpt.section(""))?;
        Ok(r)
    }
}
