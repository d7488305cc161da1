use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which inputs the generator sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorMode {
    /// Masked photo, drawable region and mask.
    Edit,
    /// Drawable region only (the all-ones-mask regime).
    Synth,
}

impl std::str::FromStr for GeneratorMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edit" => Ok(Self::Edit),
            "synth" => Ok(Self::Synth),
            other => Err(invalid(format!(
                "unknown mode {other:?} (expected edit|synth)"
            ))),
        }
    }
}

/// How the refinement level reaches the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conditioning {
    /// Level → MLP style code → per-layer AdaIN statistics.
    Style,
    /// Level as a constant extra input channel, plain instance norm.
    Concat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub resolution: usize,
    pub base_channels: usize,
    pub n_resblocks: usize,
    pub d_style: usize,
    pub style_hidden_layers: usize,
    /// Extra stride-2 blocks in the discriminator (0/1/2 for 64/128/256).
    pub discriminator_depth: usize,
    pub mode: GeneratorMode,
    pub conditioning: Conditioning,
}

/// Extra discriminator blocks per working resolution.
pub fn discriminator_depth_for(resolution: usize) -> Result<usize> {
    match resolution {
        64 => Ok(0),
        128 => Ok(1),
        256 => Ok(2),
        r => Err(invalid(format!(
            "unsupported resolution {r} (expected 64, 128 or 256)"
        ))),
    }
}

impl NetworkConfig {
    /// Full-size defaults: 64 base channels, 3×3 convs, 4/6/8 residual blocks
    /// at 64/128/256, a 64-d style code from a 3-hidden-layer MLP.
    pub fn for_resolution(resolution: usize) -> Result<Self> {
        let discriminator_depth = discriminator_depth_for(resolution)?;
        Ok(Self {
            resolution,
            base_channels: 64,
            n_resblocks: 4 + 2 * discriminator_depth,
            d_style: 64,
            style_hidden_layers: 3,
            discriminator_depth,
            mode: GeneratorMode::Edit,
            conditioning: Conditioning::Style,
        })
    }

    /// Narrow network for CPU-scale experiments at any supported resolution.
    pub fn compact(resolution: usize) -> Result<Self> {
        Ok(Self {
            base_channels: 8,
            n_resblocks: 2,
            d_style: 16,
            ..Self::for_resolution(resolution)?
        })
    }

    pub fn with_mode(mut self, mode: GeneratorMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_conditioning(mut self, conditioning: Conditioning) -> Self {
        self.conditioning = conditioning;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0
            || !self
                .resolution
                .is_multiple_of(8 << self.discriminator_depth)
        {
            return Err(invalid(format!(
                "resolution {} must be a positive multiple of {}",
                self.resolution,
                8 << self.discriminator_depth
            )));
        }
        if self.base_channels == 0 || self.d_style == 0 {
            return Err(invalid("channel counts must be positive"));
        }
        Ok(())
    }

    /// Side of the discriminator's patch-score grid.
    pub fn score_grid(&self) -> usize {
        self.resolution >> (3 + self.discriminator_depth)
    }
}
