//! Builds training inputs the way the trainer does: a fine edge map, a random
//! free-form mask and a deformed, partly discarded drawable region.
//!
//!     cargo run --example rough_sketch_pairs -- [out_dir]

use std::path::PathBuf;

use sketchrefine::data::synthetic_faces;
use sketchrefine::morphology::{generate_mask, make_drawable_region, RoughSketchConfig};
use sketchrefine::rng::{derive_seed, seeded};
use sketchrefine::RefinementLevel;

fn main() -> sketchrefine::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rough_sketch_pairs"));
    std::fs::create_dir_all(&out)?;

    let faces = synthetic_faces(4, 128, 1)?;
    let cfg = RoughSketchConfig::for_resolution(128);
    for i in 0..faces.len() {
        let mut rng = seeded(derive_seed(42, &[i as u64]));
        let mask = generate_mask(128, 128, &mut rng)?;
        let level = RefinementLevel::new(0.25 * (i + 1) as f64)?;
        let rough =
            make_drawable_region(faces.edges(i), level, &cfg, &mut rng, true)?.masked(&mask)?;

        faces
            .photo(i)
            .save_png(out.join(format!("{i}_photo.png")))?;
        faces.edges(i).save_png(out.join(format!("{i}_fine.png")))?;
        mask.save_png(out.join(format!("{i}_mask.png")))?;
        rough.save_png(out.join(format!("{i}_rough.png")))?;
        println!(
            "pair {i}: level {:.2}, radius {:.2}, mask area {:5}, rough lit {:5}",
            level.value(),
            level.radius(cfg.max_radius),
            mask.area(),
            rough.lit_count()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
