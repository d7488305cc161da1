use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sketchrefine"));
    cmd.args(args).env("RUST_LOG", "warn");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn prepare_train_refine_edit_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let data = root.join("data");
    let s = |p: &Path| p.to_str().unwrap().to_owned();

    run(
        &[
            "prepare-data",
            "--synthetic",
            "4",
            "--resolution",
            "64",
            "--train-count",
            "3",
            "--out-dir",
            &s(&data),
            "--seed",
            "2",
            "--max-radius",
            "2.5",
        ],
        &[],
    );
    assert_eq!(
        std::fs::read_to_string(data.join("triples.jsonl"))
            .unwrap()
            .lines()
            .count(),
        3
    );

    let run_dir = root.join("run");
    let config = root.join("train.toml");
    std::fs::write(
        &config,
        format!(
            r#"
seed = 1
output_dir = "{}"
network = "compact"
epochs_phase1 = 1
epochs_phase2 = 0
batch_size = 3
resolutions = [64]
max_radius = 2.5
checkpoint_every = 0

[data]
kind = "manifest"
path = "{}"

[renderer]
resolution = 64
base_channels = 4
steps = 1
batch_size = 2
"#,
            s(&run_dir),
            s(&data.join("manifest.json"))
        ),
    )
    .unwrap();
    let out = run(&["train", "--config", &s(&config)], &[]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("(1 steps)"));
    assert!(run_dir.join("generator_64.ckpt").exists());

    let refined = root.join("refined");
    let out = run(
        &[
            "refine",
            "--sketch",
            &s(&data.join("fine/00000.png")),
            "--level",
            "0.4",
            "--out-dir",
            &s(&refined),
        ],
        &[("SKETCHREFINE_CHECKPOINT_DIR", &run_dir)],
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "radius 1");
    assert!(refined.join("refined_sketch.png").exists());

    let edited = root.join("edited");
    run(
        &[
            "edit",
            "--checkpoint",
            &s(&run_dir.join("generator_64.ckpt")),
            "--renderer-checkpoint",
            &s(&run_dir.join("renderer.ckpt")),
            "--photo",
            &s(&data.join("photo/00001.png")),
            "--mask",
            &s(&data.join("mask/00001.png")),
            "--sketch",
            &s(&data.join("rough/00001.png")),
            "--out-dir",
            &s(&edited),
            "--return",
            "final_photo,refined_sketch",
        ],
        &[],
    );
    assert!(edited.join("final_photo.png").exists());
    assert!(edited.join("refined_sketch.png").exists());
    assert!(!edited.join("generated_photo.png").exists());
}

#[test]
fn bad_arguments_fail_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_sketchrefine"))
        .args([
            "refine",
            "--sketch",
            "/nonexistent.png",
            "--out-dir",
            "/tmp/x",
        ])
        .env_remove("SKETCHREFINE_CHECKPOINT_DIR")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("SKETCHREFINE_CHECKPOINT_DIR"));
}
