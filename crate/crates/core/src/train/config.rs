use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{synthetic_faces, DatasetManifest, PairDataset};
use crate::error::{invalid, Error, Result};
use crate::losses::{LossWeights, PerceptualSource};
use crate::morphology::{default_max_radius, RoughSketchConfig};
use crate::nn::{Conditioning, GeneratorMode, NetworkConfig, RendererConfig};
use crate::train::adam::AdamConfig;

/// Channel widths used for every stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkPreset {
    /// 64 base channels, 4/6/8 residual blocks.
    Full,
    /// 8 base channels, 2 residual blocks; for CPU-sized runs.
    Compact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Procedural faces from [`synthetic_faces`].
    Synthetic { count: usize, seed: u64 },
    /// A manifest written by `DatasetManifest::save`; the training split is used.
    Manifest { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RendererTrainConfig {
    pub resolution: usize,
    pub base_channels: usize,
    pub steps: u64,
    pub batch_size: usize,
    /// Reuse a pre-trained renderer instead of training one.
    pub checkpoint: Option<PathBuf>,
}

impl Default for RendererTrainConfig {
    fn default() -> Self {
        Self {
            resolution: 256,
            base_channels: 64,
            steps: 10_000,
            batch_size: 8,
            checkpoint: None,
        }
    }
}

impl RendererTrainConfig {
    pub fn network(&self) -> Result<RendererConfig> {
        RendererConfig::new(self.resolution, self.base_channels)
    }
}

/// Components that can be switched off for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// No line deformation when synthesizing drawable regions.
    Deform,
    /// No line discarding.
    Discard,
    /// No renderer-output terms in the generator objective.
    Adapt,
    /// Level fed as an input channel instead of through AdaIN.
    Concat,
    /// Train at `ℓ = 1` only.
    SingleLevel,
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deform" => Ok(Self::Deform),
            "discard" => Ok(Self::Discard),
            "adapt" => Ok(Self::Adapt),
            "concat" => Ok(Self::Concat),
            "single-level" => Ok(Self::SingleLevel),
            other => Err(invalid(format!(
                "unknown ablation {other:?} (expected deform|discard|adapt|concat|single-level)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataSource,
    pub mode: GeneratorMode,
    pub conditioning: Conditioning,
    pub network: NetworkPreset,
    pub optimizer: AdamConfig,
    /// Epochs at `ℓ = 1`.
    pub epochs_phase1: usize,
    /// Epochs with `ℓ ~ U[0, 1]`.
    pub epochs_phase2: usize,
    pub batch_size: usize,
    /// Stage resolutions, trained in order.
    pub resolutions: Vec<usize>,
    /// `R` at the largest resolution; scaled proportionally for smaller stages.
    pub max_radius: f64,
    /// Checkpoint every this many steps (0: only at the end of each stage).
    pub checkpoint_every: u64,
    /// Include the renderer-output terms at the renderer's resolution.
    pub adaptation: bool,
    pub single_level: bool,
    pub deform: bool,
    pub discard: bool,
    pub weights: LossWeights,
    pub perceptual: PerceptualSource,
    pub renderer: RendererTrainConfig,
    /// Stop after this many generator steps in total (the run can be resumed).
    pub stop_after_steps: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            data: DataSource::Synthetic { count: 16, seed: 0 },
            mode: GeneratorMode::Edit,
            conditioning: Conditioning::Style,
            network: NetworkPreset::Full,
            optimizer: AdamConfig::default(),
            epochs_phase1: 30,
            epochs_phase2: 200,
            batch_size: 8,
            resolutions: vec![64, 128, 256],
            max_radius: default_max_radius(256),
            checkpoint_every: 1000,
            adaptation: true,
            single_level: false,
            deform: true,
            discard: true,
            weights: LossWeights::default(),
            perceptual: PerceptualSource::default(),
            renderer: RendererTrainConfig::default(),
            stop_after_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a TOML file; a relative `output_dir` or data path stays relative
    /// to the working directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn apply_ablation(&mut self, ablation: Ablation) {
        match ablation {
            Ablation::Deform => self.deform = false,
            Ablation::Discard => self.discard = false,
            Ablation::Adapt => self.adaptation = false,
            Ablation::Concat => self.conditioning = Conditioning::Concat,
            Ablation::SingleLevel => self.single_level = true,
        }
    }

    pub fn target_resolution(&self) -> usize {
        self.resolutions.iter().copied().max().unwrap_or(0)
    }

    /// `R` scaled to a stage resolution.
    pub fn stage_radius(&self, resolution: usize) -> f64 {
        self.max_radius * resolution as f64 / self.target_resolution() as f64
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        self.optimizer.validate()?;
        if self.batch_size == 0 {
            return cfg_err("batch_size must be positive".into());
        }
        if self.resolutions.is_empty() {
            return cfg_err("at least one stage resolution is required".into());
        }
        if self.resolutions.windows(2).any(|w| w[0] >= w[1]) {
            return cfg_err("stage resolutions must be strictly increasing".into());
        }
        for &r in &self.resolutions {
            self.network_config(r)?;
        }
        if !(self.max_radius >= 1.0) {
            return cfg_err(format!("max_radius must be >= 1, got {}", self.max_radius));
        }
        if self.stage_radius(self.resolutions[0]) < 1.0 {
            return cfg_err("max_radius scaled to the first stage falls below 1 px".into());
        }
        self.renderer.network()?;
        self.weights
            .validate(self.weights.layer_weights.len())
            .map_err(|e| Error::Config(e.to_string()))?;
        if let DataSource::Synthetic { count: 0, .. } = self.data {
            return cfg_err("synthetic data needs count > 0".into());
        }
        Ok(())
    }

    pub fn network_config(&self, resolution: usize) -> Result<NetworkConfig> {
        let base = match self.network {
            NetworkPreset::Full => NetworkConfig::for_resolution(resolution)?,
            NetworkPreset::Compact => NetworkConfig::compact(resolution)?,
        };
        let cfg = base
            .with_mode(self.mode)
            .with_conditioning(self.conditioning);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn rough_config(&self, resolution: usize) -> RoughSketchConfig {
        RoughSketchConfig {
            max_radius: self.stage_radius(resolution),
            deform_enabled: self.deform,
            discard_enabled: self.discard,
            ..RoughSketchConfig::for_resolution(resolution)
        }
    }

    /// Loads the configured dataset at `resolution`.
    pub fn load_dataset(&self, resolution: usize) -> Result<PairDataset> {
        let ds = match &self.data {
            DataSource::Synthetic { count, seed } => synthetic_faces(*count, resolution, *seed)?,
            DataSource::Manifest { path } => {
                let manifest = DatasetManifest::load(path)?;
                PairDataset::load_train(&manifest, resolution)?
            }
        };
        if ds.is_empty() {
            return Err(Error::Config("dataset is empty".into()));
        }
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_ablations() {
        let cfg = TrainConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(TrainConfig::from_toml_str(&text).unwrap(), cfg);

        let mut a = cfg.clone();
        for ab in ["deform", "discard", "adapt", "concat", "single-level"] {
            a.apply_ablation(ab.parse().unwrap());
        }
        assert!(!a.deform && !a.discard && !a.adaptation && a.single_level);
        assert_eq!(a.conditioning, Conditioning::Concat);
        assert!("bogus".parse::<Ablation>().is_err());
    }

    #[test]
    fn stage_radius_scales_with_resolution() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.stage_radius(256), 10.0);
        assert_eq!(cfg.stage_radius(64), 2.5);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = TrainConfig {
            resolutions: vec![128, 64],
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let mut bad = TrainConfig::default();
        bad.optimizer.lr = 0.0;
        assert!(bad.validate().is_err());
    }
}
