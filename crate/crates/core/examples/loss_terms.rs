//! Evaluates each training objective on a synthetic batch and prints the
//! weighted generator total.

use candle_core::{Device, Tensor};
use sketchrefine::data::synthetic_faces;
use sketchrefine::losses::{
    loss_d_hinge, loss_g_adv, loss_perc, loss_rec, total_g_objective, GeneratorLossParts,
    LossWeights, RandomConvExtractor,
};

fn main() -> sketchrefine::Result<()> {
    let dev = Device::Cpu;
    let faces = synthetic_faces(2, 32, 0)?;
    let stack =
        |f: &dyn Fn(usize) -> sketchrefine::Result<Tensor>| -> sketchrefine::Result<Tensor> {
            Ok(Tensor::cat(&[f(0)?, f(1)?], 0)?)
        };
    let photo_gt = stack(&|i| faces.photo(i).to_tensor(&dev))?;
    let sketch_gt = stack(&|i| faces.edges(i).to_tensor(&dev))?;

    // A "prediction" that is the target blurred toward grey.
    let photo_gen = (&photo_gt * 0.7)?;
    let sketch_gen = (&sketch_gt * 0.5)?;
    let photo_out = (&photo_gt * 0.9)?;

    let w = LossWeights::default();
    let phi = RandomConvExtractor::new(0, &dev)?;
    let rec = loss_rec(
        &photo_gen,
        &sketch_gen,
        Some(&photo_out),
        &photo_gt,
        &sketch_gt,
    )?;
    let perc = loss_perc(
        &photo_gen,
        Some(&photo_out),
        &photo_gt,
        &phi,
        &w.layer_weights,
    )?;
    let fake_scores = Tensor::full(-0.5f64, (2, 1, 8, 8), &dev)?;
    let real_scores = Tensor::full(3.0f64, (2, 1, 8, 8), &dev)?;
    let adv = loss_g_adv(&fake_scores)?;
    let d = loss_d_hinge(&fake_scores, &real_scores, w.tau_g)?;

    let parts = GeneratorLossParts {
        rec: rec.to_scalar()?,
        perc: perc.to_scalar()?,
        adv: adv.to_scalar()?,
    };
    println!("L_rec  {:.5}", parts.rec);
    println!("L_perc {:.5}", parts.perc);
    println!("L_G    {:.5}", parts.adv);
    println!("L_D    {:.5} (tau {})", d.to_scalar::<f64>()?, w.tau_g);
    println!(
        "total  {:.5} = {}·L_rec + {}·L_perc + {}·L_G",
        total_g_objective(&parts, &w),
        w.rec,
        w.perc,
        w.adv_g
    );
    Ok(())
}
