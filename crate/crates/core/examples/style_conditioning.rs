//! Shows how the refinement level drives the generator: the style code and
//! the per-layer AdaIN statistics it predicts, and how much the refined
//! sketch moves as the level changes.

use candle_core::Device;
use sketchrefine::data::synthetic_faces;
use sketchrefine::nn::{Generator, NetworkConfig};
use sketchrefine::{Mask, Photo, RefinementLevel};

fn main() -> sketchrefine::Result<()> {
    let cfg = NetworkConfig::compact(64)?;
    let g = Generator::new(&cfg, 0, &Device::Cpu)?;
    println!(
        "{} normalized layers, channels {:?}",
        g.norm_channels().len(),
        g.norm_channels()
    );

    let face = synthetic_faces(1, 64, 5)?;
    let (photo, mask) = (Photo::zeros(64, 64), Mask::ones(64, 64));
    let base = g.forward_single(
        Some(&photo),
        face.edges(0),
        Some(&mask),
        RefinementLevel::ZERO,
    )?;
    for l in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let level = RefinementLevel::new(l)?;
        let style = g.style_bundle(level)?;
        let first = &style.per_layer[0];
        let out = g.forward_single(Some(&photo), face.edges(0), Some(&mask), level)?;
        let moved = out
            .sketch
            .pixels()
            .iter()
            .zip(base.sketch.pixels())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / out.sketch.pixels().len() as f64;
        println!(
            "level {l:.2}  code[0..3] {:+.3?}  layer0 mean[0] {:+.4} std[0] {:.4}  |ΔS| {moved:.5}",
            &style.global_code[..3],
            first.mean[0],
            first.std()[0],
        );
    }
    Ok(())
}
