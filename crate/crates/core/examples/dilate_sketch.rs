//! Dilates a stroke image at several refinement levels and writes the
//! drawable regions next to each other.
//!
//!     cargo run --example dilate_sketch -- [sketch.png] [out_dir]

use std::path::PathBuf;

use sketchrefine::morphology::{default_max_radius, dilate};
use sketchrefine::{RefinementLevel, SketchMap};

fn demo_sketch() -> SketchMap {
    // A circle and a diagonal, one pixel wide.
    SketchMap::from_fn(128, 128, |y, x| {
        let (dy, dx) = (y as f64 - 64.0, x as f64 - 64.0);
        let ring = ((dy * dy + dx * dx).sqrt() - 40.0).abs() < 0.5;
        if ring || y == x {
            1.0
        } else {
            0.0
        }
    })
}

fn main() -> sketchrefine::Result<()> {
    let mut args = std::env::args().skip(1);
    let sketch = match args.next() {
        Some(p) => SketchMap::load_png(p)?.binarize(0.5),
        None => demo_sketch(),
    };
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dilate_sketch"));
    std::fs::create_dir_all(&out)?;

    let max_radius = default_max_radius(256);
    for l in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let r = RefinementLevel::new(l)?.radius(max_radius);
        let region = dilate(&sketch, r)?;
        let covered = region.pixels().iter().filter(|&&v| v > 0.0).count();
        let path = out.join(format!("level_{l:.2}.png"));
        region.save_png(&path)?;
        println!(
            "level {l:.2}  radius {r:5.2}  covered {covered:6} px  -> {}",
            path.display()
        );
    }
    Ok(())
}
