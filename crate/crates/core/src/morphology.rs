//! Rough-sketch synthesis: line deformation, line discarding and dilation of
//! fine edge maps into drawable regions, plus random editing masks.
//!
//! Dilation is a same-padded convolution with an all-ones square kernel of
//! side `2r + 1` followed by clipping to `[0, 1]`. A disk footprint would also
//! be a valid choice; the square keeps the convolution form exact. Fractional
//! radii blend the two neighbouring integer radii linearly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::raster::{Mask, RefinementLevel, SketchMap};
use crate::rng::SeededRng;

/// Parameters of the drawable-region generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoughSketchConfig {
    /// Maximum dilation radius `R` in pixels, reached at level 1.
    pub max_radius: f64,
    /// Per-pixel displacement bound as a multiple of the radius (`<= 1`).
    pub deform_max_offset_factor: f64,
    /// Spacing of the coarse random offset grid, in pixels.
    pub deform_cell_size: usize,
    /// Inclusive range for the number of discarded patches.
    pub discard_patch_count: (usize, usize),
    /// Inclusive range for the side of each discarded square patch.
    pub discard_patch_size: (usize, usize),
    pub deform_enabled: bool,
    pub discard_enabled: bool,
    pub binarize_threshold: f64,
    pub rng_seed: u64,
}

impl Default for RoughSketchConfig {
    fn default() -> Self {
        Self::for_resolution(256)
    }
}

/// Default maximum radius for a working resolution: 10 px for 256×256 faces,
/// 4 px for 64×64 faces, proportional otherwise.
pub fn default_max_radius(resolution: usize) -> f64 {
    match resolution {
        64 => 4.0,
        256 => 10.0,
        r => (10.0 * r as f64 / 256.0).max(1.0),
    }
}

impl RoughSketchConfig {
    /// Defaults scaled to `resolution`. Patch sizes are 8–32 px at 256.
    pub fn for_resolution(resolution: usize) -> Self {
        let scale = resolution as f64 / 256.0;
        let lo = ((8.0 * scale).round() as usize).max(1);
        let hi = ((32.0 * scale).round() as usize).max(lo);
        Self {
            max_radius: default_max_radius(resolution),
            deform_max_offset_factor: 1.0,
            deform_cell_size: 16,
            discard_patch_count: (0, 4),
            discard_patch_size: (lo, hi),
            deform_enabled: true,
            discard_enabled: true,
            binarize_threshold: 0.5,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_radius >= 1.0) || !self.max_radius.is_finite() {
            return Err(invalid(format!(
                "max_radius must be >= 1, got {}",
                self.max_radius
            )));
        }
        if !(0.0..=1.0).contains(&self.deform_max_offset_factor) {
            return Err(invalid(format!(
                "deform_max_offset_factor must lie in [0, 1], got {}",
                self.deform_max_offset_factor
            )));
        }
        if self.deform_cell_size == 0 {
            return Err(invalid("deform_cell_size must be positive"));
        }
        let (clo, chi) = self.discard_patch_count;
        let (slo, shi) = self.discard_patch_size;
        if clo > chi || slo > shi {
            return Err(invalid("discard ranges must be non-empty"));
        }
        if !(self.binarize_threshold > 0.0 && self.binarize_threshold < 1.0) {
            return Err(invalid("binarize_threshold must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Morphological dilation by a (possibly fractional) radius.
pub fn dilate(sketch: &SketchMap, radius: f64) -> Result<SketchMap> {
    if !radius.is_finite() || radius < 0.0 {
        return Err(invalid(format!(
            "dilation radius must be finite and >= 0, got {radius}"
        )));
    }
    let lower = radius.floor();
    let alpha = radius - lower;
    let lo = dilate_integer(sketch, lower as usize);
    if alpha == 0.0 {
        return Ok(lo);
    }
    let hi = dilate_integer(sketch, lower as usize + 1);
    let data = lo
        .pixels()
        .iter()
        .zip(hi.pixels())
        .map(|(&a, &b)| (a + alpha * (b - a)).clamp(0.0, 1.0))
        .collect();
    Ok(SketchMap::from_raw_unchecked(
        sketch.height(),
        sketch.width(),
        data,
    ))
}

/// Box-sum convolution with a `(2r+1)²` all-ones kernel, zero padded, clipped.
fn dilate_integer(sketch: &SketchMap, radius: usize) -> SketchMap {
    if radius == 0 {
        return sketch.clone();
    }
    let (h, w) = sketch.dims();
    let rows = box_sum_rows(sketch.pixels(), h, w, radius);
    let transposed = transpose(&rows, h, w);
    let cols = box_sum_rows(&transposed, w, h, radius);
    let data = transpose(&cols, w, h)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    SketchMap::from_raw_unchecked(h, w, data)
}

fn box_sum_rows(src: &[f64], h: usize, w: usize, radius: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    let mut prefix = vec![0.0; w + 1];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            prefix[x + 1] = prefix[x] + row[x];
        }
        for x in 0..w {
            let a = x.saturating_sub(radius);
            let b = (x + radius + 1).min(w);
            out[y * w + x] = prefix[b] - prefix[a];
        }
    }
    out
}

fn transpose(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = src[y * w + x];
        }
    }
    out
}

/// Warps the binarized sketch with a smooth random displacement field whose
/// magnitude never exceeds `radius * cfg.deform_max_offset_factor`.
///
/// Each lit pixel is moved by an integer offset of Euclidean length within the
/// bound; pixels that land on the same target merge.
pub fn deform_lines(
    sketch: &SketchMap,
    radius: f64,
    cfg: &RoughSketchConfig,
    rng: &mut SeededRng,
) -> Result<SketchMap> {
    if !radius.is_finite() || radius < 0.0 {
        return Err(invalid(format!(
            "deformation radius must be finite and >= 0, got {radius}"
        )));
    }
    let binary = sketch.binarize(cfg.binarize_threshold);
    let bound = radius * cfg.deform_max_offset_factor;
    if bound == 0.0 {
        return Ok(binary);
    }
    let (h, w) = binary.dims();
    let field = DisplacementField::random(h, w, cfg.deform_cell_size, bound, rng);

    let bound_sq = bound * bound;
    let mut out = SketchMap::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            if binary.get(y, x) == 0.0 {
                continue;
            }
            let (dy, dx) = field.at(y, x);
            let (oy, ox) = integer_offset(dy, dx, bound_sq);
            let ty = (y as i64 + oy).clamp(0, h as i64 - 1) as usize;
            let tx = (x as i64 + ox).clamp(0, w as i64 - 1) as usize;
            out.set(ty, tx, 1.0);
        }
    }
    Ok(out)
}

/// Rounds a real offset to an integer one whose squared length stays `<= bound_sq`.
fn integer_offset(dy: f64, dx: f64, bound_sq: f64) -> (i64, i64) {
    let len_sq = |a: i64, b: i64| (a * a + b * b) as f64;
    let (ry, rx) = (dy.round() as i64, dx.round() as i64);
    if len_sq(ry, rx) <= bound_sq {
        return (ry, rx);
    }
    let (mut ty, mut tx) = (dy.trunc() as i64, dx.trunc() as i64);
    while len_sq(ty, tx) > bound_sq {
        if ty.abs() >= tx.abs() {
            ty -= ty.signum();
        } else {
            tx -= tx.signum();
        }
    }
    (ty, tx)
}

/// Coarse random offsets on a regular grid, bilinearly upsampled and rescaled
/// so the largest per-pixel magnitude equals the bound.
struct DisplacementField {
    width: usize,
    dy: Vec<f64>,
    dx: Vec<f64>,
}

impl DisplacementField {
    fn random(h: usize, w: usize, cell: usize, bound: f64, rng: &mut SeededRng) -> Self {
        let gh = (h - 1) / cell + 2;
        let gw = (w - 1) / cell + 2;
        let grid: Vec<(f64, f64)> = (0..gh * gw)
            .map(|_| (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
            .collect();

        let mut dy = vec![0.0; h * w];
        let mut dx = vec![0.0; h * w];
        let mut max_mag: f64 = 0.0;
        for y in 0..h {
            let gy = y as f64 / cell as f64;
            let iy = gy.floor() as usize;
            let ty = gy - iy as f64;
            for x in 0..w {
                let gx = x as f64 / cell as f64;
                let ix = gx.floor() as usize;
                let tx = gx - ix as f64;
                let g = |r: usize, c: usize| grid[r * gw + c];
                let lerp = |a: (f64, f64), b: (f64, f64), t: f64| {
                    (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
                };
                let top = lerp(g(iy, ix), g(iy, ix + 1), tx);
                let bottom = lerp(g(iy + 1, ix), g(iy + 1, ix + 1), tx);
                let v = lerp(top, bottom, ty);
                dy[y * w + x] = v.0;
                dx[y * w + x] = v.1;
                max_mag = max_mag.max(v.0.hypot(v.1));
            }
        }
        if max_mag > 0.0 {
            let scale = bound / max_mag;
            dy.iter_mut().chain(dx.iter_mut()).for_each(|v| *v *= scale);
        }
        Self { width: w, dy, dx }
    }

    fn at(&self, y: usize, x: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.dy[i], self.dx[i])
    }
}

/// Zeroes a random number of random axis-aligned square patches.
pub fn discard_patches(
    sketch: &SketchMap,
    cfg: &RoughSketchConfig,
    rng: &mut SeededRng,
) -> SketchMap {
    let mut out = sketch.clone();
    if !cfg.discard_enabled {
        return out;
    }
    let (h, w) = sketch.dims();
    let (clo, chi) = cfg.discard_patch_count;
    let (slo, shi) = cfg.discard_patch_size;
    let count = rng.random_range(clo..=chi);
    for _ in 0..count {
        let size = rng.random_range(slo..=shi).min(h).min(w);
        let y0 = rng.random_range(0..=h - size);
        let x0 = rng.random_range(0..=w - size);
        for y in y0..y0 + size {
            for x in x0..x0 + size {
                out.set(y, x, 0.0);
            }
        }
    }
    out
}

/// Builds the drawable region `Ω_ℓ(s)` for a sketch (the caller applies the
/// mask). With `training` set, lines are deformed and partially discarded
/// before dilation; at inference only dilation is applied.
pub fn make_drawable_region(
    sketch: &SketchMap,
    level: RefinementLevel,
    cfg: &RoughSketchConfig,
    rng: &mut SeededRng,
    training: bool,
) -> Result<SketchMap> {
    let radius = level.radius(cfg.max_radius);
    let mut lines = sketch.binarize(cfg.binarize_threshold);
    if training {
        if cfg.deform_enabled {
            lines = deform_lines(&lines, radius, cfg, rng)?;
        }
        if cfg.discard_enabled {
            lines = discard_patches(&lines, cfg, rng);
        }
    }
    dilate(&lines, radius)
}

/// Shape of the random rotated-rectangle editing masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskConfig {
    /// Rectangle side as a fraction of the image side, inclusive range.
    pub side_fraction: (f64, f64),
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            side_fraction: (0.25, 0.6),
        }
    }
}

/// One randomly sized, centred and rotated rectangle, clipped to the image.
pub fn generate_mask(height: usize, width: usize, rng: &mut SeededRng) -> Result<Mask> {
    generate_mask_with(height, width, &MaskConfig::default(), rng)
}

pub fn generate_mask_with(
    height: usize,
    width: usize,
    cfg: &MaskConfig,
    rng: &mut SeededRng,
) -> Result<Mask> {
    if height == 0 || width == 0 {
        return Err(invalid("mask dimensions must be positive"));
    }
    let (flo, fhi) = cfg.side_fraction;
    if !(0.0 < flo && flo <= fhi && fhi < 1.0) {
        return Err(invalid(format!(
            "mask side fractions must satisfy 0 < lo <= hi < 1, got ({flo}, {fhi})"
        )));
    }
    let rect_h = rng.random_range(flo..=fhi) * height as f64;
    let rect_w = rng.random_range(flo..=fhi) * width as f64;
    let cy = rng.random_range(0.0..height as f64);
    let cx = rng.random_range(0.0..width as f64);
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let (sin, cos) = angle.sin_cos();

    let (cy_px, cx_px) = (cy.floor() as usize, cx.floor() as usize);
    Ok(Mask::from_fn(height, width, |y, x| {
        if (y, x) == (cy_px, cx_px) {
            return true;
        }
        let dy = y as f64 + 0.5 - cy;
        let dx = x as f64 + 0.5 - cx;
        let u = dx * cos + dy * sin;
        let v = -dx * sin + dy * cos;
        u.abs() <= rect_w / 2.0 && v.abs() <= rect_h / 2.0
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn single_pixel(h: usize, w: usize, y: usize, x: usize) -> SketchMap {
        SketchMap::from_fn(h, w, |yy, xx| ((yy, xx) == (y, x)) as u8 as f64)
    }

    /// Set dilation with a square footprint, evaluated pixel by pixel.
    fn brute_dilate(s: &SketchMap, r: usize) -> SketchMap {
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

    #[test]
    fn single_pixel_radius_one_is_three_by_three() {
        let s = single_pixel(20, 20, 10, 10);
        let d = dilate(&s, 1.0).unwrap();
        assert_eq!(d, brute_dilate(&s, 1));
        for y in 0..20 {
            for x in 0..20 {
                let inside = (9..=11).contains(&y) && (9..=11).contains(&x);
                assert_eq!(d.get(y, x), inside as u8 as f64, "({y},{x})");
            }
        }
    }

    #[test]
    fn radius_zero_is_identity() {
        let s = SketchMap::from_fn(9, 11, |y, x| ((y * 3 + x) % 5) as f64 / 4.0);
        assert_eq!(dilate(&s, 0.0).unwrap(), s);
    }

    #[test]
    fn fractional_radius_blends_integer_results() {
        let s = SketchMap::from_fn(16, 16, |y, x| ((y * 7 + x * 3) % 11 == 0) as u8 as f64);
        let d = dilate(&s, 1.5).unwrap();
        let (a, b) = (brute_dilate(&s, 1), brute_dilate(&s, 2));
        for i in 0..d.pixels().len() {
            let expected = 0.5 * a.pixels()[i] + 0.5 * b.pixels()[i];
            assert!((d.pixels()[i] - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn negative_radius_rejected() {
        let s = SketchMap::zeros(4, 4);
        assert!(dilate(&s, -0.5).is_err());
        assert!(dilate(&s, f64::NAN).is_err());
        assert!(deform_lines(&s, -1.0, &RoughSketchConfig::default(), &mut seeded(0)).is_err());
    }

    #[test]
    fn deform_with_zero_radius_is_identity() {
        let s = SketchMap::from_fn(32, 32, |y, x| (y == x || y == 5) as u8 as f64);
        let out = deform_lines(&s, 0.0, &RoughSketchConfig::default(), &mut seeded(3)).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn deformed_single_pixel_stays_within_radius() {
        let cfg = RoughSketchConfig::default();
        for seed in 0..20 {
            let s = single_pixel(32, 32, 16, 16);
            let out = deform_lines(&s, 3.0, &cfg, &mut seeded(seed)).unwrap();
            let lit: Vec<(usize, usize)> = (0..32)
                .flat_map(|y| (0..32).map(move |x| (y, x)))
                .filter(|&(y, x)| out.get(y, x) == 1.0)
                .collect();
            assert_eq!(lit.len(), 1);
            let (y, x) = lit[0];
            let d = ((y as f64 - 16.0).powi(2) + (x as f64 - 16.0).powi(2)).sqrt();
            assert!(d <= 3.0, "seed {seed}: moved {d}");
        }
    }

    #[test]
    fn deform_is_deterministic() {
        let s = SketchMap::from_fn(64, 64, |y, x| (x == 20 || y == 40) as u8 as f64);
        let cfg = RoughSketchConfig::for_resolution(64);
        let a = deform_lines(&s, 4.0, &cfg, &mut seeded(11)).unwrap();
        let b = deform_lines(&s, 4.0, &cfg, &mut seeded(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_patch_count_leaves_sketch() {
        let s = SketchMap::from_fn(32, 32, |_, _| 1.0);
        let cfg = RoughSketchConfig {
            discard_patch_count: (0, 0),
            ..RoughSketchConfig::default()
        };
        assert_eq!(discard_patches(&s, &cfg, &mut seeded(1)), s);
    }

    #[test]
    fn one_patch_zeroes_exactly_its_area() {
        let s = SketchMap::from_fn(32, 32, |_, _| 1.0);
        let cfg = RoughSketchConfig {
            discard_patch_count: (1, 1),
            discard_patch_size: (8, 8),
            ..RoughSketchConfig::default()
        };
        let out = discard_patches(&s, &cfg, &mut seeded(5));
        let zeroed: Vec<(usize, usize)> = (0..32)
            .flat_map(|y| (0..32).map(move |x| (y, x)))
            .filter(|&(y, x)| out.get(y, x) != s.get(y, x))
            .collect();
        assert_eq!(zeroed.len(), 64);
        let (y0, x0) = zeroed[0];
        assert!(zeroed
            .iter()
            .all(|&(y, x)| (y0..y0 + 8).contains(&y) && (x0..x0 + 8).contains(&x)));
    }

    #[test]
    fn inference_region_is_plain_dilation() {
        let s = SketchMap::from_fn(64, 64, |y, x| (x == 30 || y == 12) as u8 as f64);
        let cfg = RoughSketchConfig::for_resolution(256);
        let at_zero =
            make_drawable_region(&s, RefinementLevel::ZERO, &cfg, &mut seeded(0), false).unwrap();
        assert_eq!(at_zero, s);
        let at_one =
            make_drawable_region(&s, RefinementLevel::MAX, &cfg, &mut seeded(0), false).unwrap();
        assert_eq!(cfg.max_radius, 10.0);
        assert_eq!(at_one, brute_dilate(&s, 10));
    }

    #[test]
    fn training_region_covers_ground_truth_without_discard() {
        let s = SketchMap::from_fn(64, 64, |y, x| {
            (x == 30 || y == 12 || x + y == 70) as u8 as f64
        });
        let cfg = RoughSketchConfig {
            discard_enabled: false,
            ..RoughSketchConfig::for_resolution(64)
        };
        for seed in 0..10 {
            let level = RefinementLevel::new(0.3 + 0.07 * seed as f64).unwrap();
            let region = make_drawable_region(&s, level, &cfg, &mut seeded(seed), true).unwrap();
            for (g, r) in s.pixels().iter().zip(region.pixels()) {
                assert!(*g == 0.0 || *r >= 1.0);
            }
        }
    }

    #[test]
    fn masks_are_binary_and_proper() {
        for seed in 0..200 {
            let m = generate_mask(64, 48, &mut seeded(seed)).unwrap();
            assert!(m.pixels().iter().all(|&v| v <= 1));
            let area = m.area();
            assert!(area > 0 && area < 64 * 48, "seed {seed}: area {area}");
        }
        assert_eq!(
            generate_mask(32, 32, &mut seeded(9)).unwrap(),
            generate_mask(32, 32, &mut seeded(9)).unwrap()
        );
        assert_eq!(Mask::ones(8, 8).area(), 64);
    }

    #[test]
    fn config_validation() {
        assert!(RoughSketchConfig::default().validate().is_ok());
        let bad = RoughSketchConfig {
            max_radius: 0.5,
            ..RoughSketchConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RoughSketchConfig {
            deform_max_offset_factor: 1.5,
            ..RoughSketchConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RoughSketchConfig {
            discard_patch_size: (9, 3),
            ..RoughSketchConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
