mod common;

use candle_core::{Device, Tensor};
use common::{gradient_check, seeded_uniform};
use sketchrefine::losses::{
    loss_d_hinge, loss_g_adv, loss_perc, loss_rec, total_g_objective, GeneratorLossParts,
    LossWeights, RandomConvExtractor,
};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn randn(shape: (usize, usize, usize, usize), seed: u64) -> Tensor {
    let (a, b, c, d) = shape;
    seeded_uniform(&[a, b, c, d], 1.0, seed)
}

#[test]
fn reconstruction_gradient_matches_finite_differences() {
    let photo_gt = randn((4, 3, 8, 8), 1);
    let sketch_gt = randn((4, 1, 8, 8), 2);
    let sketch = randn((4, 1, 8, 8), 3);
    let out = randn((4, 3, 8, 8), 4);
    let x = randn((4, 3, 8, 8), 5);
    let err = gradient_check(&x, H, |p| {
        loss_rec(p, &sketch, Some(&out), &photo_gt, &sketch_gt).unwrap()
    });
    assert!(err < TOL, "photo gradient error {err}");
    let s = randn((4, 1, 8, 8), 6);
    let err = gradient_check(&s, H, |s| {
        loss_rec(&x, s, None, &photo_gt, &sketch_gt).unwrap()
    });
    assert!(err < TOL, "sketch gradient error {err}");
}

#[test]
fn perceptual_gradient_matches_finite_differences() {
    let phi = RandomConvExtractor::new(7, &Device::Cpu).unwrap();
    let gt = randn((4, 3, 8, 8), 8);
    let out = randn((4, 3, 8, 8), 9);
    let x = randn((4, 3, 8, 8), 10);
    let err = gradient_check(&x, H, |p| {
        loss_perc(p, Some(&out), &gt, &phi, &[1.0, 0.5]).unwrap()
    });
    assert!(err < TOL, "perceptual gradient error {err}");
}

#[test]
fn adversarial_gradients_match_finite_differences() {
    let fake = randn((4, 1, 8, 8), 11);
    let real = randn((4, 1, 8, 8), 12);
    let err = gradient_check(&fake, H, |f| loss_g_adv(f).unwrap());
    assert!(err < TOL, "generator hinge error {err}");
    for tau in [0.5, 1.0] {
        let err = gradient_check(&fake, H, |f| loss_d_hinge(f, &real, tau).unwrap());
        assert!(err < TOL, "fake-side hinge error {err}");
        let err = gradient_check(&real, H, |r| loss_d_hinge(&fake, r, tau).unwrap());
        assert!(err < TOL, "real-side hinge error {err}");
    }
}

#[test]
fn losses_are_non_negative_where_expected() {
    let phi = RandomConvExtractor::new(1, &Device::Cpu).unwrap();
    for seed in 0..20 {
        let a = randn((2, 3, 8, 8), seed);
        let b = randn((2, 3, 8, 8), seed + 100);
        let s = randn((2, 1, 8, 8), seed + 200);
        let rec = loss_rec(&a, &s, Some(&a), &b, &s)
            .unwrap()
            .to_scalar::<f64>()
            .unwrap();
        let perc = loss_perc(&a, None, &b, &phi, &[1.0, 0.5])
            .unwrap()
            .to_scalar::<f64>()
            .unwrap();
        let d = loss_d_hinge(&s, &s, 10.0)
            .unwrap()
            .to_scalar::<f64>()
            .unwrap();
        assert!(rec >= 0.0 && perc >= 0.0 && d >= 0.0);
    }
}

#[test]
fn perceptual_target_is_detached() {
    let phi = RandomConvExtractor::new(2, &Device::Cpu).unwrap();
    let gen = randn((1, 3, 8, 8), 1);
    let gt = candle_core::Var::from_tensor(&randn((1, 3, 8, 8), 2)).unwrap();
    let grads = loss_perc(&gen, None, gt.as_tensor(), &phi, &[1.0, 1.0])
        .unwrap()
        .backward()
        .unwrap();
    assert!(grads.get(gt.as_tensor()).is_none());
}

#[test]
fn weighted_total_uses_the_default_weights() {
    let w = LossWeights::default();
    let parts = GeneratorLossParts {
        rec: 0.01,
        perc: 0.2,
        adv: -0.5,
    };
    assert!((total_g_objective(&parts, &w) - (1.0 + 0.2 - 0.5)).abs() < 1e-12);
}
