//! Edits a photo inside a mask following a rough sketch. Without arguments it
//! builds an untrained 64 px model and a synthetic face, which is enough to
//! see the data flow and the known-region compositing.
//!
//!     cargo run --example edit_photo -- [generator.ckpt renderer.ckpt]

use std::path::Path;

use candle_core::Device;
use sketchrefine::data::synthetic_faces;
use sketchrefine::inference::{EditRequest, ReturnSet, Session};
use sketchrefine::nn::{Generator, GeneratorMode, NetworkConfig, Renderer, RendererConfig};
use sketchrefine::{Mask, RefinementLevel};

fn main() -> sketchrefine::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let session = match args.as_slice() {
        [g, f] => Session::from_checkpoints(Path::new(g), Some(Path::new(f)))?,
        _ => {
            let g = Generator::new(&NetworkConfig::compact(64)?, 0, &Device::Cpu)?;
            let f = Renderer::new(&RendererConfig::new(64, 8)?, 1, &Device::Cpu)?;
            Session::new(g, Some(f), 4.0)?
        }
    };
    let res = session.resolution();
    let face = synthetic_faces(1, res, 9)?;
    let (lo, hi) = (res / 4, 3 * res / 4);
    let mask = Mask::from_fn(res, res, |y, x| {
        (lo..hi).contains(&y) && (lo..hi).contains(&x)
    });

    let out = std::env::temp_dir().join("edit_photo");
    std::fs::create_dir_all(&out)?;
    for l in [0.0, 0.5, 1.0] {
        let resp = session.edit(&EditRequest {
            photo: Some(face.photo(0).clone()),
            mask: Some(mask.clone()),
            sketch: face.edges(0).clone(),
            level: RefinementLevel::new(l)?,
            mode: GeneratorMode::Edit,
            returns: ReturnSet::ALL,
        })?;
        if let (Some(s), Some(p)) = (resp.refined_sketch, resp.final_photo) {
            s.save_png(out.join(format!("refined_{l:.1}.png")))?;
            p.save_png(out.join(format!("final_{l:.1}.png")))?;
        }
        println!(
            "level {l:.1}: radius {:.2}, renderer used: {}",
            resp.radius, resp.renderer_used
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
