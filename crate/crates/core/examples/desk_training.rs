use std::time::Instant;

use sketchrefine::train::{read_metrics, run_schedule, TrainConfig};

fn main() -> sketchrefine::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml").into());
    let cfg = TrainConfig::load(&path)?;
    let t = Instant::now();
    let report = run_schedule(&cfg)?;
    let rows = read_metrics(&report.metrics)?;
    for r in rows.iter().step_by(25) {
        println!("step {:4}  l_rec {:.4}  l_d {:.3}", r.step, r.l_rec, r.l_d);
    }
    println!("{} steps in {:.1?}", report.steps, t.elapsed());
    Ok(())
}
