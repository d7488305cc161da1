#![allow(dead_code)]

use std::path::Path;

use candle_core::{Tensor, Var};
use rand::Rng;
use sketchrefine::nn::{Conditioning, GeneratorMode, NetworkConfig};
use sketchrefine::rng::seeded;
use sketchrefine::train::{DataSource, NetworkPreset, RendererTrainConfig, TrainConfig};
use sketchrefine::SketchMap;

/// 16×16 network with one residual block; fast enough for property tests.
pub fn tiny_net(mode: GeneratorMode, conditioning: Conditioning) -> NetworkConfig {
    NetworkConfig {
        resolution: 16,
        base_channels: 4,
        n_resblocks: 1,
        d_style: 8,
        style_hidden_layers: 3,
        discriminator_depth: 0,
        mode,
        conditioning,
    }
}

pub fn random_binary(h: usize, w: usize, density: f64, seed: u64) -> SketchMap {
    let mut rng = seeded(seed);
    SketchMap::from_fn(
        h,
        w,
        |_, _| if rng.random_bool(density) { 1.0 } else { 0.0 },
    )
}

/// A few random straight strokes, closer to an edge map than salt noise.
pub fn random_strokes(h: usize, w: usize, strokes: usize, seed: u64) -> SketchMap {
    let mut rng = seeded(seed);
    let mut s = SketchMap::zeros(h, w);
    for _ in 0..strokes {
        let (y0, x0) = (rng.random_range(0..h) as f64, rng.random_range(0..w) as f64);
        let (y1, x1) = (rng.random_range(0..h) as f64, rng.random_range(0..w) as f64);
        let n = (y1 - y0).abs().max((x1 - x0).abs()).max(1.0) as usize;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let y = (y0 + t * (y1 - y0)).round() as usize;
            let x = (x0 + t * (x1 - x0)).round() as usize;
            s.set(y.min(h - 1), x.min(w - 1), 1.0);
        }
    }
    s
}

/// Neighbourhood maximum over the `(2r+1)²` square, clipped at the border.
pub fn brute_force_dilate(s: &SketchMap, r: usize) -> SketchMap {
    let (h, w) = s.dims();
    SketchMap::from_fn(h, w, |y, x| {
        let mut m: f64 = 0.0;
        for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
            for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                m = m.max(s.get(yy, xx));
            }
        }
        m
    })
}

/// A 64-px compact configuration that trains in seconds.
pub fn small_train_config(out: &Path) -> TrainConfig {
    TrainConfig {
        seed: 5,
        output_dir: out.to_path_buf(),
        data: DataSource::Synthetic { count: 4, seed: 2 },
        network: NetworkPreset::Compact,
        epochs_phase1: 1,
        epochs_phase2: 1,
        batch_size: 2,
        resolutions: vec![64],
        max_radius: 4.0,
        checkpoint_every: 0,
        renderer: RendererTrainConfig {
            resolution: 64,
            base_channels: 4,
            steps: 2,
            batch_size: 2,
            checkpoint: None,
        },
        ..TrainConfig::default()
    }
}

/// Norm-wise relative error between the autograd gradient of `f` at `x`
/// and a central finite difference with step `h`.
pub fn gradient_check(x: &Tensor, h: f64, f: impl Fn(&Tensor) -> Tensor) -> f64 {
    let var = Var::from_tensor(x).unwrap();
    let grads = f(var.as_tensor()).backward().unwrap();
    let analytic = grads
        .get(var.as_tensor())
        .unwrap()
        .flatten_all()
        .unwrap()
        .to_vec1::<f64>()
        .unwrap();

    let base = x.flatten_all().unwrap().to_vec1::<f64>().unwrap();
    let eval = |v: &[f64]| {
        let t = Tensor::from_slice(v, x.dims(), x.device()).unwrap();
        f(&t).to_scalar::<f64>().unwrap()
    };
    let mut numeric = Vec::with_capacity(base.len());
    let mut probe = base.clone();
    for i in 0..base.len() {
        probe[i] = base[i] + h;
        let up = eval(&probe);
        probe[i] = base[i] - h;
        let down = eval(&probe);
        probe[i] = base[i];
        numeric.push((up - down) / (2.0 * h));
    }
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-300)
}

/// Seeded tensor with entries uniform in `[-scale, scale]`.
pub fn seeded_uniform(shape: &[usize], scale: f64, seed: u64) -> Tensor {
    let mut rng = seeded(seed);
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..=scale)).collect();
    Tensor::from_vec(v, shape, &candle_core::Device::Cpu).unwrap()
}
