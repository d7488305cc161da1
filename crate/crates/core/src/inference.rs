//! Loaded models and the refine / edit / synthesize operations.
//!
//! A [`Session`] is immutable after construction; every call is a pure
//! function of its arguments, so one session can serve concurrent requests.

use std::path::{Path, PathBuf};

use candle_core::Device;
use serde::{Deserialize, Serialize};

use crate::data::masked_input;
use crate::error::{invalid, Error, Result};
use crate::morphology::dilate;
use crate::nn::{composite, Checkpoint, Generator, GeneratorMode, Renderer};
use crate::raster::{Mask, Photo, RefinementLevel, SketchMap};

/// Threshold used to binarize incoming sketches before dilation.
pub const SKETCH_THRESHOLD: f64 = 0.5;

/// Which outputs an edit request wants back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnSet {
    pub refined_sketch: bool,
    pub generated_photo: bool,
    pub final_photo: bool,
}

impl ReturnSet {
    pub const ALL: Self = Self {
        refined_sketch: true,
        generated_photo: true,
        final_photo: true,
    };

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut set = Self {
            refined_sketch: false,
            generated_photo: false,
            final_photo: false,
        };
        for name in names {
            match name.as_ref() {
                "refined_sketch" => set.refined_sketch = true,
                "generated_photo" => set.generated_photo = true,
                "final_photo" => set.final_photo = true,
                other => {
                    return Err(invalid(format!(
                        "unknown output {other:?} (expected refined_sketch|generated_photo|final_photo)"
                    )))
                }
            }
        }
        if !(set.refined_sketch || set.generated_photo || set.final_photo) {
            return Err(invalid("request asks for no outputs"));
        }
        Ok(set)
    }
}

#[derive(Debug, Clone)]
pub struct EditRequest {
    /// Required in edit mode.
    pub photo: Option<Photo>,
    /// Required in edit mode; synthesis always uses an all-ones mask.
    pub mask: Option<Mask>,
    pub sketch: SketchMap,
    pub level: RefinementLevel,
    pub mode: GeneratorMode,
    pub returns: ReturnSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditResponse {
    pub refined_sketch: Option<SketchMap>,
    pub generated_photo: Option<Photo>,
    pub final_photo: Option<Photo>,
    /// Dilation radius applied to the input sketch.
    pub radius: f64,
    /// Whether the renderer ran for this request.
    pub renderer_used: bool,
}

#[derive(Debug, Clone)]
pub struct Session {
    generator: Generator,
    renderer: Option<Renderer>,
    max_radius: f64,
}

impl Session {
    pub fn new(generator: Generator, renderer: Option<Renderer>, max_radius: f64) -> Result<Self> {
        if !(max_radius >= 0.0) || !max_radius.is_finite() {
            return Err(invalid(format!(
                "max radius must be finite and >= 0, got {max_radius}"
            )));
        }
        if let Some(f) = &renderer {
            let (a, b) = (f.config().resolution, generator.config().resolution);
            if a != b {
                return Err(invalid(format!(
                    "renderer resolution {a} differs from generator resolution {b}"
                )));
            }
        }
        Ok(Self {
            generator,
            renderer,
            max_radius,
        })
    }

    /// Loads a generator checkpoint (whose metadata records `max_radius`) and
    /// an optional renderer checkpoint.
    pub fn from_checkpoints(generator: &Path, renderer: Option<&Path>) -> Result<Self> {
        let device = Device::Cpu;
        let ckpt = Checkpoint::load(generator, &device)?;
        let max_radius = ckpt.meta["max_radius"]
            .as_f64()
            .ok_or_else(|| Error::Checkpoint("generator checkpoint lacks max_radius".into()))?;
        let g = Generator::from_checkpoint(&ckpt, &device)?;
        let f = renderer
            .map(|p| Renderer::from_checkpoint(&Checkpoint::load(p, &device)?, &device))
            .transpose()?;
        Self::new(g, f, max_radius)
    }

    pub fn resolution(&self) -> usize {
        self.generator.config().resolution
    }

    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    pub fn mode(&self) -> GeneratorMode {
        self.generator.config().mode
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn renderer(&self) -> Option<&Renderer> {
        self.renderer.as_ref()
    }

    /// Radius applied at `level`: `level · R`.
    pub fn radius_for(&self, level: RefinementLevel) -> f64 {
        level.radius(self.max_radius)
    }

    fn check_dims(&self, dims: (usize, usize), what: &str) -> Result<()> {
        let r = self.resolution();
        if dims != (r, r) {
            return Err(invalid(format!(
                "{what} is {}x{}, the model expects {r}x{r}",
                dims.1, dims.0
            )));
        }
        Ok(())
    }

    /// `S_ℓ = dilate(binarize(sketch), ℓR) ⊙ M` and the radius used.
    pub fn drawable_region(
        &self,
        sketch: &SketchMap,
        mask: &Mask,
        level: RefinementLevel,
    ) -> Result<(SketchMap, f64)> {
        self.check_dims(sketch.dims(), "sketch")?;
        self.check_dims(mask.dims(), "mask")?;
        let r = self.radius_for(level);
        let region = dilate(&sketch.binarize(SKETCH_THRESHOLD), r)?.masked(mask)?;
        Ok((region, r))
    }

    /// Resolves the photo/mask pair the generator sees for a request.
    fn conditioning(
        &self,
        mode: GeneratorMode,
        photo: Option<&Photo>,
        mask: Option<&Mask>,
    ) -> Result<(Photo, Mask)> {
        let r = self.resolution();
        match mode {
            GeneratorMode::Edit => {
                if self.mode() == GeneratorMode::Synth {
                    return Err(invalid(
                        "the loaded model is a synthesis model; use synth mode",
                    ));
                }
                let photo = photo.ok_or_else(|| invalid("edit mode requires a photo"))?;
                let mask = mask.ok_or_else(|| invalid("edit mode requires a mask"))?;
                self.check_dims(photo.dims(), "photo")?;
                self.check_dims(mask.dims(), "mask")?;
                Ok((photo.clone(), mask.clone()))
            }
            GeneratorMode::Synth => Ok((Photo::zeros(r, r), Mask::ones(r, r))),
        }
    }

    fn run_generator(
        &self,
        photo: &Photo,
        region: &SketchMap,
        mask: &Mask,
        level: RefinementLevel,
    ) -> Result<(Photo, SketchMap, Photo)> {
        let photo_in = masked_input(photo, mask)?;
        let out = match self.mode() {
            GeneratorMode::Edit => {
                self.generator
                    .forward_single(Some(&photo_in), region, Some(mask), level)?
            }
            GeneratorMode::Synth => self.generator.forward_single(None, region, None, level)?,
        };
        Ok((out.photo, out.sketch, photo_in))
    }

    /// Refined sketch `S_gen` for a sketch, optional mask (all ones when
    /// absent) and level. Returns the sketch and the radius applied.
    pub fn refine(
        &self,
        sketch: &SketchMap,
        mask: Option<&Mask>,
        level: RefinementLevel,
    ) -> Result<(SketchMap, f64)> {
        let r = self.resolution();
        let ones;
        let mask = match mask {
            Some(m) => m,
            None => {
                ones = Mask::ones(r, r);
                &ones
            }
        };
        let (region, radius) = self.drawable_region(sketch, mask, level)?;
        let photo = Photo::zeros(r, r);
        let (_, refined, _) = self.run_generator(&photo, &region, mask, level)?;
        Ok((refined, radius))
    }

    /// Runs the generator, then the renderer when a photo output is wanted,
    /// and pastes the known region of the input photo back outside the mask.
    /// Without a renderer the generator's photo is composited instead.
    pub fn edit(&self, req: &EditRequest) -> Result<EditResponse> {
        let (photo, mask) = self.conditioning(req.mode, req.photo.as_ref(), req.mask.as_ref())?;
        let (region, radius) = self.drawable_region(&req.sketch, &mask, req.level)?;
        let (generated, refined, photo_in) =
            self.run_generator(&photo, &region, &mask, req.level)?;

        let mut renderer_used = false;
        let final_photo = if req.returns.final_photo {
            let rendered = match &self.renderer {
                Some(f) => {
                    renderer_used = true;
                    f.render(&photo_in, &refined, &mask)?
                }
                None => generated.clone(),
            };
            Some(composite(&rendered, &photo, &mask)?)
        } else {
            None
        };
        Ok(EditResponse {
            refined_sketch: req.returns.refined_sketch.then_some(refined),
            generated_photo: req.returns.generated_photo.then_some(generated),
            final_photo,
            radius,
            renderer_used,
        })
    }
}

/// Finds the highest-resolution `generator_<res>.ckpt` in a training output
/// directory, and `renderer.ckpt` if present.
pub fn checkpoints_in_dir(dir: &Path) -> Result<(PathBuf, Option<PathBuf>)> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Error::Checkpoint(format!("cannot list {}: {e}", dir.display())))?;
    let generator = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let res = p
                .file_name()?
                .to_str()?
                .strip_prefix("generator_")?
                .strip_suffix(".ckpt")?
                .parse::<usize>()
                .ok()?;
            Some((res, p))
        })
        .max_by_key(|(res, _)| *res)
        .map(|(_, p)| p)
        .ok_or_else(|| {
            Error::Checkpoint(format!("no generator_<res>.ckpt in {}", dir.display()))
        })?;
    let renderer = Some(dir.join("renderer.ckpt")).filter(|p| p.is_file());
    Ok((generator, renderer))
}
