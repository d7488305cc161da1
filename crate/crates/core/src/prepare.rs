//! Offline export of training triples: for each training photo, a fine edge
//! map, a random mask and a rough drawable region, plus a JSONL manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{load_pair, synthetic_faces, write_dataset_dir, DatasetManifest};
use crate::error::{invalid, Result};
use crate::morphology::{generate_mask, make_drawable_region, RoughSketchConfig};
use crate::raster::RefinementLevel;
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareConfig {
    /// Directory with `photos/` and optional `edges/`; when absent,
    /// `synthetic` procedural faces are generated into `out_dir/source`.
    pub data_root: Option<PathBuf>,
    pub synthetic: Option<usize>,
    pub resolution: usize,
    pub train_count: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub rough: RoughSketchConfig,
}

/// One line of `triples.jsonl`. Paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub index: usize,
    pub source: PathBuf,
    pub photo: PathBuf,
    pub fine: PathBuf,
    pub rough: PathBuf,
    pub mask: PathBuf,
    pub level: f64,
    pub radius: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PrepareSummary {
    pub manifest: PathBuf,
    pub triples: PathBuf,
    pub records: Vec<TripleRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRIPLES_FILE: &str = "triples.jsonl";

/// Writes `photo/`, `fine/`, `mask/`, `rough/` PNGs, `triples.jsonl`, and a
/// dataset manifest that `train` can consume.
pub fn prepare_data(cfg: &PrepareConfig) -> Result<PrepareSummary> {
    cfg.rough.validate()?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out)?;
    let root = match (&cfg.data_root, cfg.synthetic) {
        (Some(root), _) => root.clone(),
        (None, Some(count)) => {
            let dir = out.join("source");
            write_dataset_dir(&synthetic_faces(count, cfg.resolution, cfg.seed)?, &dir)?;
            dir
        }
        (None, None) => {
            return Err(invalid(
                "either a data root or a synthetic count is required",
            ))
        }
    };
    let manifest = DatasetManifest::scan(&root, cfg.resolution, cfg.train_count)?;
    manifest.validate()?;
    let manifest_path = out.join(MANIFEST_FILE);
    manifest.save(&manifest_path)?;

    for sub in ["photo", "fine", "mask", "rough"] {
        fs::create_dir_all(out.join(sub))?;
    }
    let triples_path = out.join(TRIPLES_FILE);
    let mut jsonl = BufWriter::new(File::create(&triples_path)?);
    let mut records = Vec::new();
    for (index, record) in manifest.train_records().enumerate() {
        let (photo, fine) = load_pair(record, cfg.resolution)?;
        let seed = derive_seed(cfg.seed, &[index as u64]);
        let mut rng = seeded(seed);
        let level = RefinementLevel::new(rng.random_range(0.0..=1.0))?;
        let mask = generate_mask(cfg.resolution, cfg.resolution, &mut rng)?;
        let rough =
            make_drawable_region(&fine, level, &cfg.rough, &mut rng, true)?.masked(&mask)?;

        let name = PathBuf::from(format!("{index:05}.png"));
        let rel = |sub: &str| Path::new(sub).join(&name);
        photo.save_png(out.join(rel("photo")))?;
        fine.save_png(out.join(rel("fine")))?;
        mask.save_png(out.join(rel("mask")))?;
        rough.save_png(out.join(rel("rough")))?;
        let rec = TripleRecord {
            index,
            source: record.photo.clone(),
            photo: rel("photo"),
            fine: rel("fine"),
            rough: rel("rough"),
            mask: rel("mask"),
            level: level.value(),
            radius: level.radius(cfg.rough.max_radius),
            seed,
        };
        serde_json::to_writer(&mut jsonl, &rec).map_err(|e| invalid(e.to_string()))?;
        writeln!(jsonl)?;
        records.push(rec);
    }
    jsonl.flush()?;
    Ok(PrepareSummary {
        manifest: manifest_path,
        triples: triples_path,
        records,
    })
}
