//! Raster types shared across the pipeline: sketches, masks, photos and the
//! refinement level, plus 8-bit PNG conversion.
//!
//! Internal ranges: sketches and masks live in `[0, 1]` (1 = stroke / editable),
//! photos in `[-1, 1]`. Quantization to 8 bits is round-half-up.

use std::io::Cursor;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use image::{GrayImage, ImageFormat, Luma, Rgb, RgbImage};

use crate::error::{invalid, Error, Result};

/// Element type used for every tensor in the crate.
pub const DTYPE: DType = DType::F64;

/// Maps a `[0, 1]` value to 8 bits, rounding half up.
pub fn quantize_unit(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Single-channel stroke image, values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl SketchMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("sketch dimensions must be positive"));
        }
        if data.len() != height * width {
            return Err(invalid(format!(
                "sketch buffer has {} values, expected {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("sketch value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    /// Builds a sketch from arbitrary values, clamping into `[0, 1]`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x).clamp(0.0, 1.0));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub(crate) fn from_raw_unchecked(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: f64) {
        self.data[y * self.width + x] = v.clamp(0.0, 1.0);
    }

    /// Pixels `>= threshold` become 1, the rest 0.
    pub fn binarize(&self, threshold: f64) -> Self {
        let data = self
            .data
            .iter()
            .map(|&v| if v >= threshold { 1.0 } else { 0.0 })
            .collect();
        Self::from_raw_unchecked(self.height, self.width, data)
    }

    pub fn lit_count(&self) -> usize {
        self.data.iter().filter(|&&v| v > 0.0).count()
    }

    /// Elementwise product with a mask (`S ⊙ M`).
    pub fn masked(&self, mask: &Mask) -> Result<Self> {
        if self.dims() != mask.dims() {
            return Err(invalid(format!(
                "sketch {:?} and mask {:?} differ in size",
                self.dims(),
                mask.dims()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(mask.pixels())
            .map(|(&v, &m)| if m == 1 { v } else { 0.0 })
            .collect();
        Ok(Self::from_raw_unchecked(self.height, self.width, data))
    }

    pub fn to_tensor(&self, device: &Device) -> Result<Tensor> {
        Ok(Tensor::from_slice(
            &self.data,
            (1, 1, self.height, self.width),
            device,
        )?)
    }

    /// Reads a `(1, H, W)` or `(1, 1, H, W)` tensor, clamping into `[0, 1]`.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let t = t.to_dtype(DTYPE)?;
        let dims = t.dims().to_vec();
        let (h, w) = match dims.as_slice() {
            [1, h, w] | [1, 1, h, w] => (*h, *w),
            _ => {
                return Err(invalid(format!(
                    "expected a single-channel image, got {dims:?}"
                )))
            }
        };
        let data = t.flatten_all()?.to_vec1::<f64>()?;
        Ok(Self::from_fn(h, w, |y, x| data[y * w + x]))
    }

    pub fn to_luma8(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([quantize_unit(self.get(y as usize, x as usize))])
        })
    }

    pub fn from_luma8(img: &GrayImage) -> Self {
        let (w, h) = img.dimensions();
        Self::from_fn(h as usize, w as usize, |y, x| {
            img.get_pixel(x as u32, y as u32)[0] as f64 / 255.0
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_luma8().save_with_format(path, ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_luma8();
        Ok(Self::from_luma8(&img))
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        encode_png(|buf| self.to_luma8().write_to(buf, ImageFormat::Png))
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_luma8();
        Ok(Self::from_luma8(&img))
    }
}

/// Binary editing mask; 1 marks the region to be regenerated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("mask dimensions must be positive"));
        }
        if data.len() != height * width {
            return Err(invalid(format!(
                "mask buffer has {} values, expected {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(invalid("mask values must be 0 or 1"));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    /// The synthesis-mode mask: every pixel editable.
    pub fn ones(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![1; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x) as u8);
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    pub fn area(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn to_tensor(&self, device: &Device) -> Result<Tensor> {
        let data: Vec<f64> = self.data.iter().map(|&v| v as f64).collect();
        Ok(Tensor::from_vec(
            data,
            (1, 1, self.height, self.width),
            device,
        )?)
    }

    pub fn to_luma8(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([if self.get(y as usize, x as usize) {
                255
            } else {
                0
            }])
        })
    }

    /// Pixels at or above mid-gray are editable.
    pub fn from_luma8(img: &GrayImage) -> Self {
        let (w, h) = img.dimensions();
        Self::from_fn(h as usize, w as usize, |y, x| {
            img.get_pixel(x as u32, y as u32)[0] >= 128
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_luma8().save_with_format(path, ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_luma8();
        Ok(Self::from_luma8(&img))
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        encode_png(|buf| self.to_luma8().write_to(buf, ImageFormat::Png))
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_luma8();
        Ok(Self::from_luma8(&img))
    }
}

/// Three-channel photo stored channel-planar (`C×H×W`), values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Photo {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Photo {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("photo dimensions must be positive"));
        }
        if data.len() != 3 * height * width {
            return Err(invalid(format!(
                "photo buffer has {} values, expected 3x{}x{}",
                data.len(),
                height,
                width
            )));
        }
        if let Some(v) = data.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(invalid(format!("photo value {v} outside [-1, 1]")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; 3 * height * width],
        }
    }

    /// `f(channel, y, x)`, clamped into `[-1, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(3 * height * width);
        for c in 0..3 {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x).clamp(-1.0, 1.0));
                }
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn to_tensor(&self, device: &Device) -> Result<Tensor> {
        Ok(Tensor::from_slice(
            &self.data,
            (1, 3, self.height, self.width),
            device,
        )?)
    }

    /// Reads a `(3, H, W)` or `(1, 3, H, W)` tensor, clamping into `[-1, 1]`.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let t = t.to_dtype(DTYPE)?;
        let dims = t.dims().to_vec();
        let (h, w) = match dims.as_slice() {
            [3, h, w] | [1, 3, h, w] => (*h, *w),
            _ => return Err(invalid(format!("expected a 3-channel image, got {dims:?}"))),
        };
        let data = t.flatten_all()?.to_vec1::<f64>()?;
        Ok(Self::from_fn(h, w, |c, y, x| data[(c * h + y) * w + x]))
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = img.dimensions();
        Self::from_fn(h as usize, w as usize, |c, y, x| {
            img.get_pixel(x as u32, y as u32)[c] as f64 / 127.5 - 1.0
        })
    }

    pub fn to_rgb8(&self) -> RgbImage {
        RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let (x, y) = (x as usize, y as usize);
            Rgb([0, 1, 2].map(|c| quantize_unit((self.get(c, y, x) + 1.0) / 2.0)))
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_rgb8().save_with_format(path, ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        Ok(Self::from_rgb8(&img))
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        encode_png(|buf| self.to_rgb8().write_to(buf, ImageFormat::Png))
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
        Ok(Self::from_rgb8(&img))
    }
}

fn encode_png(
    write: impl FnOnce(&mut Cursor<Vec<u8>>) -> image::ImageResult<()>,
) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    write(&mut buf).map_err(Error::from)?;
    Ok(buf.into_inner())
}

/// Refinement level in `[0, 1]`; larger means the input sketch is trusted less.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RefinementLevel(f64);

impl RefinementLevel {
    pub const ZERO: Self = Self(0.0);
    pub const MAX: Self = Self(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(invalid(format!("refinement level {value} outside [0, 1]")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Dilation radius `r = level * max_radius`.
    pub fn radius(self, max_radius: f64) -> f64 {
        self.0 * max_radius
    }
}

impl TryFrom<f64> for RefinementLevel {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<RefinementLevel> for f64 {
    fn from(level: RefinementLevel) -> f64 {
        level.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_rejects_out_of_range() {
        assert!(RefinementLevel::new(-0.01).is_err());
        assert!(RefinementLevel::new(1.01).is_err());
        assert!(RefinementLevel::new(f64::NAN).is_err());
        assert_eq!(RefinementLevel::new(1.0).unwrap().radius(10.0), 10.0);
    }

    #[test]
    fn quantization_rounds_half_up() {
        assert_eq!(quantize_unit(0.0), 0);
        assert_eq!(quantize_unit(1.0), 255);
        assert_eq!(quantize_unit(0.5 / 255.0), 1);
        assert_eq!(quantize_unit(0.49 / 255.0), 0);
    }

    #[test]
    fn photo_endpoints_map_to_unit_interval() {
        let img = RgbImage::from_fn(
            2,
            1,
            |x, _| if x == 0 { Rgb([0; 3]) } else { Rgb([255; 3]) },
        );
        let p = Photo::from_rgb8(&img);
        assert_eq!(p.get(0, 0, 0), -1.0);
        assert_eq!(p.get(2, 0, 1), 1.0);
        assert_eq!(p.to_rgb8(), img);
    }

    #[test]
    fn sketch_validation() {
        assert!(SketchMap::new(2, 2, vec![0.0, 1.0, 0.5, 1.5]).is_err());
        assert!(SketchMap::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Mask::new(1, 2, vec![0, 2]).is_err());
    }

    #[test]
    fn png_round_trip_within_one_step() {
        let s = SketchMap::from_fn(5, 7, |y, x| ((y * 7 + x) as f64 * 0.037) % 1.0);
        let back = SketchMap::from_png_bytes(&s.to_png_bytes().unwrap()).unwrap();
        for (a, b) in s.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        let m = Mask::from_fn(4, 4, |y, x| (x + y) % 3 == 0);
        assert_eq!(Mask::from_png_bytes(&m.to_png_bytes().unwrap()).unwrap(), m);
    }
}
