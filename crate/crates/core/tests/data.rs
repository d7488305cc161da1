use std::fs;

use image::{GrayImage, Luma, Rgb, RgbImage};
use sketchrefine::data::{load_pair, synthetic_faces, DatasetManifest, PairRecord};
use sketchrefine::morphology::RoughSketchConfig;
use sketchrefine::prepare::{prepare_data, PrepareConfig, TripleRecord};
use sketchrefine::{Error, Mask, Photo, SketchMap};

#[test]
fn pairs_are_cropped_and_resized_to_the_working_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let photo = dir.path().join("p.png");
    let edge = dir.path().join("e.png");
    RgbImage::from_fn(512, 640, |x, y| {
        Rgb([(x % 256) as u8, (y % 256) as u8, 128])
    })
    .save(&photo)
    .unwrap();
    GrayImage::from_fn(512, 512, |x, _| Luma([if x % 64 == 0 { 255 } else { 0 }]))
        .save(&edge)
        .unwrap();

    let (p, e) = load_pair(
        &PairRecord {
            photo: photo.clone(),
            edge: Some(edge),
        },
        256,
    )
    .unwrap();
    assert_eq!((p.dims(), e.dims()), ((256, 256), (256, 256)));
    assert!(p.pixels().iter().all(|v| (-1.0..=1.0).contains(v)));
    assert!(e.pixels().iter().all(|v| (0.0..=1.0).contains(v)));

    let (_, fallback) = load_pair(&PairRecord { photo, edge: None }, 64).unwrap();
    assert_eq!(fallback.dims(), (64, 64));
    assert!(fallback.pixels().iter().all(|&v| v == 0.0 || v == 1.0));
}

#[test]
fn png_round_trips_stay_within_one_quantization_step() {
    let photo = Photo::from_fn(16, 16, |c, y, x| ((c * 7 + y * 3 + x) as f64 / 40.0).sin());
    let back = Photo::from_png_bytes(&photo.to_png_bytes().unwrap()).unwrap();
    for (a, b) in photo.pixels().iter().zip(back.pixels()) {
        assert!((a - b).abs() <= 2.0 / 255.0 / 2.0 + 1e-12);
    }
    let sketch = SketchMap::from_fn(16, 16, |y, x| (y * 16 + x) as f64 / 255.0);
    let back = SketchMap::from_png_bytes(&sketch.to_png_bytes().unwrap()).unwrap();
    for (a, b) in sketch.pixels().iter().zip(back.pixels()) {
        assert!((a - b).abs() <= 1.0 / 255.0);
    }
    let mask = Mask::from_fn(9, 7, |y, x| (x + y) % 3 == 0);
    assert_eq!(
        Mask::from_png_bytes(&mask.to_png_bytes().unwrap()).unwrap(),
        mask
    );
}

#[test]
fn corrupt_images_name_the_offending_file() {
    let dir = tempfile::tempdir().unwrap();
    let photo = dir.path().join("broken.png");
    fs::write(&photo, b"definitely not a png").unwrap();
    match load_pair(
        &PairRecord {
            photo: photo.clone(),
            edge: None,
        },
        64,
    ) {
        Err(Error::Ingest { path, .. }) => assert_eq!(path, photo),
        other => panic!("expected an ingest error, got {other:?}"),
    }
}

#[test]
fn manifests_split_by_file_name() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("photos")).unwrap();
    fs::create_dir_all(dir.path().join("edges")).unwrap();
    for name in ["c", "a", "b"] {
        RgbImage::new(8, 8)
            .save(dir.path().join("photos").join(format!("{name}.png")))
            .unwrap();
    }
    GrayImage::new(8, 8)
        .save(dir.path().join("edges/b.png"))
        .unwrap();
    let m = DatasetManifest::scan(dir.path(), 8, 2).unwrap();
    m.validate().unwrap();
    let names: Vec<_> = m
        .records
        .iter()
        .map(|r| r.photo.file_stem().unwrap().to_owned())
        .collect();
    assert_eq!(names, ["a", "b", "c"]);
    assert_eq!((m.train.clone(), m.test.clone()), (vec![0, 1], vec![2]));
    assert!(m.records[0].edge.is_none() && m.records[1].edge.is_some());
}

#[test]
fn synthetic_faces_are_reproducible() {
    let a = synthetic_faces(3, 32, 4).unwrap();
    let b = synthetic_faces(3, 32, 4).unwrap();
    assert_eq!(a.len(), 3);
    for i in 0..3 {
        assert_eq!(a.photo(i), b.photo(i));
        assert_eq!(a.edges(i), b.edges(i));
        assert!(a.edges(i).lit_count() > 0);
    }
}

#[test]
fn prepare_data_writes_triples_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PrepareConfig {
        data_root: None,
        synthetic: Some(5),
        resolution: 64,
        train_count: 3,
        out_dir: dir.path().to_path_buf(),
        seed: 1,
        rough: RoughSketchConfig {
            max_radius: 2.5,
            ..RoughSketchConfig::for_resolution(64)
        },
    };
    let summary = prepare_data(&cfg).unwrap();
    assert_eq!(summary.records.len(), 3);
    let lines: Vec<TripleRecord> = fs::read_to_string(&summary.triples)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines, summary.records);
    for r in &lines {
        assert!(r.radius <= 2.5 && (r.radius - r.level * 2.5).abs() < 1e-12);
        let rough = SketchMap::load_png(dir.path().join(&r.rough)).unwrap();
        let mask = Mask::load_png(dir.path().join(&r.mask)).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                if !mask.get(y, x) {
                    assert_eq!(rough.get(y, x), 0.0);
                }
            }
        }
    }
    let manifest = DatasetManifest::load(&summary.manifest).unwrap();
    assert_eq!((manifest.train.len(), manifest.test.len()), (3, 2));
    assert_eq!(prepare_data(&cfg).unwrap().records, summary.records);
}
