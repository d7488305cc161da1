//! Photo / edge-map ingestion, the train/test split, and a deterministic
//! gradient-based edge operator used when no precomputed edge map exists.

use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{DynamicImage, GrayImage, ImageBuffer, Pixel, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::raster::{Mask, Photo, SketchMap};
use crate::rng::seeded;

/// Threshold applied to the normalized gradient magnitude in [`fallback_edges`].
pub const DEFAULT_EDGE_THRESHOLD: f64 = 0.2;

/// One photo and its (optional) precomputed edge map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub photo: PathBuf,
    pub edge: Option<PathBuf>,
}

/// Records ordered by file name, split into a training prefix and a test suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub resolution: usize,
    pub records: Vec<PairRecord>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl DatasetManifest {
    /// Scans `root/photos/*.png` and pairs each with `root/edges/<stem>.png`
    /// when present. The first `train_count` photos (by file name) train.
    pub fn scan(root: impl AsRef<Path>, resolution: usize, train_count: usize) -> Result<Self> {
        let root = root.as_ref();
        let photo_dir = root.join("photos");
        let edge_dir = root.join("edges");
        let entries = fs::read_dir(&photo_dir).map_err(|e| Error::Ingest {
            path: photo_dir.clone(),
            reason: e.to_string(),
        })?;
        let mut photos: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .is_some_and(|ext| ext.eq_ignore_ascii_case("png"))
            })
            .collect();
        photos.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

        let records = photos
            .into_iter()
            .map(|photo| {
                let edge = photo
                    .file_stem()
                    .map(|stem| edge_dir.join(stem).with_extension("png"))
                    .filter(|p| p.is_file());
                PairRecord { photo, edge }
            })
            .collect();
        Self::from_records(records, resolution, train_count)
    }

    pub fn from_records(
        records: Vec<PairRecord>,
        resolution: usize,
        train_count: usize,
    ) -> Result<Self> {
        if resolution == 0 {
            return Err(invalid("resolution must be positive"));
        }
        let n = records.len();
        let cut = train_count.min(n);
        Ok(Self {
            resolution,
            records,
            train: (0..cut).collect(),
            test: (cut..n).collect(),
        })
    }

    pub fn train_records(&self) -> impl Iterator<Item = &PairRecord> {
        self.train.iter().map(|&i| &self.records[i])
    }

    pub fn test_records(&self) -> impl Iterator<Item = &PairRecord> {
        self.test.iter().map(|&i| &self.records[i])
    }

    /// Checks the split is disjoint and every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        if self.train.iter().any(|i| self.test.contains(i)) {
            return Err(invalid("train and test splits overlap"));
        }
        for r in &self.records {
            for p in std::iter::once(&r.photo).chain(r.edge.as_ref()) {
                if !p.is_file() {
                    return Err(Error::Ingest {
                        path: p.clone(),
                        reason: "file does not exist".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| invalid(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Ingest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Center-crops to a square, then resizes bilinearly to `resolution`.
fn square_resize<P>(
    img: &ImageBuffer<P, Vec<P::Subpixel>>,
    resolution: u32,
) -> ImageBuffer<P, Vec<P::Subpixel>>
where
    P: Pixel + 'static,
{
    let (w, h) = img.dimensions();
    let side = w.min(h);
    let cropped = imageops::crop_imm(img, (w - side) / 2, (h - side) / 2, side, side).to_image();
    if side == resolution {
        cropped
    } else {
        imageops::resize(&cropped, resolution, resolution, FilterType::Triangle)
    }
}

pub fn load_photo(path: impl AsRef<Path>, resolution: usize) -> Result<Photo> {
    let rgb: RgbImage = open_image(path.as_ref())?.to_rgb8();
    Ok(Photo::from_rgb8(&square_resize(&rgb, resolution as u32)))
}

pub fn load_edge_map(path: impl AsRef<Path>, resolution: usize) -> Result<SketchMap> {
    let gray: GrayImage = open_image(path.as_ref())?.to_luma8();
    Ok(SketchMap::from_luma8(&square_resize(
        &gray,
        resolution as u32,
    )))
}

/// Loads one photo/edge pair at `resolution`. Photos land in `[-1, 1]`,
/// edges in `[0, 1]`; a missing edge file falls back to [`fallback_edges`].
pub fn load_pair(record: &PairRecord, resolution: usize) -> Result<(Photo, SketchMap)> {
    let photo = load_photo(&record.photo, resolution)?;
    let edges = match &record.edge {
        Some(path) => load_edge_map(path, resolution)?,
        None => fallback_edges(&photo, DEFAULT_EDGE_THRESHOLD),
    };
    Ok((photo, edges))
}

/// Sobel gradient magnitude of the luminance, normalized by its maximum and
/// thresholded to a binary edge map. Borders replicate.
pub fn fallback_edges(photo: &Photo, threshold: f64) -> SketchMap {
    let (h, w) = photo.dims();
    let luma: Vec<f64> = (0..h * w)
        .map(|i| {
            let (y, x) = (i / w, i % w);
            0.299 * photo.get(0, y, x) + 0.587 * photo.get(1, y, x) + 0.114 * photo.get(2, y, x)
        })
        .collect();
    let at = |y: isize, x: isize| {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        luma[y * w + x]
    };
    let mut mag = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
            let gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1))
                - (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
            mag[y as usize * w + x as usize] = gx.hypot(gy);
        }
    }
    let max = mag.iter().cloned().fold(0.0, f64::max);
    if max <= 1e-12 {
        return SketchMap::zeros(h, w);
    }
    SketchMap::from_fn(h, w, |y, x| {
        (mag[y * w + x] / max >= threshold) as u8 as f64
    })
}

/// `I_in = I ⊙ (1 - M)`: editable pixels are set to 0 (mid-gray).
pub fn masked_input(photo: &Photo, mask: &Mask) -> Result<Photo> {
    if photo.dims() != mask.dims() {
        return Err(invalid(format!(
            "photo {:?} and mask {:?} differ in size",
            photo.dims(),
            mask.dims()
        )));
    }
    let (h, w) = photo.dims();
    Ok(Photo::from_fn(h, w, |c, y, x| {
        if mask.get(y, x) {
            0.0
        } else {
            photo.get(c, y, x)
        }
    }))
}

/// Photos and fine edge maps held in memory at one resolution.
#[derive(Debug, Clone)]
pub struct PairDataset {
    resolution: usize,
    photos: Vec<Photo>,
    edges: Vec<SketchMap>,
}

impl PairDataset {
    pub fn new(photos: Vec<Photo>, edges: Vec<SketchMap>) -> Result<Self> {
        if photos.len() != edges.len() {
            return Err(invalid("photo and edge counts differ"));
        }
        let resolution = photos.first().map(|p| p.height()).unwrap_or(0);
        for (p, e) in photos.iter().zip(&edges) {
            if p.dims() != (resolution, resolution) || e.dims() != (resolution, resolution) {
                return Err(invalid("all pairs must be square at one resolution"));
            }
        }
        Ok(Self {
            resolution,
            photos,
            edges,
        })
    }

    /// Loads the training split of `manifest` at `resolution`.
    pub fn load_train(manifest: &DatasetManifest, resolution: usize) -> Result<Self> {
        let (photos, edges) = manifest
            .train_records()
            .map(|r| load_pair(r, resolution))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Self::new(photos, edges)
    }

    pub fn len(&self) -> usize {
        self.photos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.photos.is_empty()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn photo(&self, i: usize) -> &Photo {
        &self.photos[i]
    }

    pub fn edges(&self, i: usize) -> &SketchMap {
        &self.edges[i]
    }

    /// Bilinear resample of every pair to another resolution.
    pub fn resampled(&self, resolution: usize) -> Result<Self> {
        if resolution == self.resolution {
            return Ok(self.clone());
        }
        let r = resolution as u32;
        let photos = self
            .photos
            .iter()
            .map(|p| Photo::from_rgb8(&imageops::resize(&p.to_rgb8(), r, r, FilterType::Triangle)))
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| {
                SketchMap::from_luma8(&imageops::resize(&e.to_luma8(), r, r, FilterType::Triangle))
            })
            .collect();
        Self::new(photos, edges)
    }
}

/// Procedurally drawn face-like photos (head ellipse, eyes, mouth, hair band)
/// with their fallback edge maps. Used by examples and tests in place of a
/// real photo collection.
pub fn synthetic_faces(count: usize, resolution: usize, seed: u64) -> Result<PairDataset> {
    let mut photos = Vec::with_capacity(count);
    let mut edges = Vec::with_capacity(count);
    let n = resolution as f64;
    for i in 0..count {
        let mut rng = seeded(crate::rng::derive_seed(seed, &[i as u64]));
        let bg: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.9..-0.2));
        let skin: [f64; 3] = [
            rng.random_range(0.3..0.8),
            rng.random_range(0.0..0.5),
            rng.random_range(-0.3..0.2),
        ];
        let hair: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..-0.5));
        let cy = n * rng.random_range(0.45..0.55);
        let cx = n * rng.random_range(0.45..0.55);
        let ry = n * rng.random_range(0.30..0.38);
        let rx = n * rng.random_range(0.22..0.30);
        let eye_dy = ry * rng.random_range(0.15..0.3);
        let eye_dx = rx * rng.random_range(0.3..0.45);
        let eye_r = n * rng.random_range(0.03..0.05);
        let mouth_dy = ry * rng.random_range(0.4..0.55);
        let mouth_w = rx * rng.random_range(0.3..0.6);
        let hair_line = cy - ry * rng.random_range(0.55..0.8);

        let photo = Photo::from_fn(resolution, resolution, |c, y, x| {
            let (fy, fx) = (y as f64 + 0.5, x as f64 + 0.5);
            let head = ((fy - cy) / ry).powi(2) + ((fx - cx) / rx).powi(2) <= 1.0;
            if !head {
                return bg[c];
            }
            if fy < hair_line {
                return hair[c];
            }
            let eye = |ex: f64| (fy - (cy - eye_dy)).hypot(fx - ex) <= eye_r;
            if eye(cx - eye_dx) || eye(cx + eye_dx) {
                return -0.95;
            }
            if (fy - (cy + mouth_dy)).abs() <= n * 0.015 && (fx - cx).abs() <= mouth_w {
                return [0.6, -0.6, -0.5][c];
            }
            skin[c]
        });
        edges.push(fallback_edges(&photo, DEFAULT_EDGE_THRESHOLD));
        photos.push(photo);
    }
    PairDataset::new(photos, edges)
}

/// Writes a dataset in the `photos/` + `edges/` directory layout.
pub fn write_dataset_dir(dataset: &PairDataset, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    fs::create_dir_all(root.join("photos"))?;
    fs::create_dir_all(root.join("edges"))?;
    for i in 0..dataset.len() {
        let name = format!("{i:05}.png");
        dataset.photo(i).save_png(root.join("photos").join(&name))?;
        dataset.edges(i).save_png(root.join("edges").join(&name))?;
    }
    Ok(())
}
