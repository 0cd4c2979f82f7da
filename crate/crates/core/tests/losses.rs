mod common;

use parcel_trace::losses::{loss_eval, loss_grad, softmax, LossConfig};
use parcel_trace::{finite_diff_check, LossKind, OneHotTarget, Tensor};
use proptest::prelude::*;

fn logits_strategy(h: usize, w: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (
        prop::collection::vec(-3.0f64..3.0, h * w * 3),
        prop::collection::vec(0u8..3, h * w),
    )
}

fn tensor(h: usize, w: usize, v: Vec<f64>) -> Tensor<f64> {
    Tensor::new(h, w, 3, v).unwrap()
}

#[test]
fn analytic_gradient_matches_independent_differences() {
    let mut r = common::rng(77);
    for kind in LossKind::ALL {
        let cfg = LossConfig::<f64>::of_kind(kind);
        for _ in 0..10 {
            let z = common::random_logits(&mut r, 4, 4);
            let g = common::random_target(&mut r, 4, 4);
            let numeric = common::numeric_gradient(&z, &g, &cfg, 1e-5);
            let analytic = loss_grad(&z, &g, &cfg).unwrap();
            for (a, n) in analytic.data().iter().zip(&numeric) {
                assert!((a - n).abs() <= 1e-6 * a.abs().max(n.abs()).max(1e-3), "{kind:?}: {a} vs {n}");
            }
        }
    }
}

#[test]
fn finite_diff_check_within_tolerance_for_every_kind() {
    let mut r = common::rng(5);
    for kind in LossKind::ALL {
        let cfg = LossConfig::<f64>::of_kind(kind);
        for _ in 0..20 {
            let z = common::random_logits(&mut r, 4, 4);
            let g = common::random_target(&mut r, 4, 4);
            let e = finite_diff_check(&z, &g, &cfg, 1e-4).unwrap();
            assert!(e <= 1e-4, "{kind:?}: {e}");
        }
    }
}

#[test]
fn coarse_step_has_larger_error_on_focal() {
    let mut r = common::rng(8);
    let cfg = LossConfig::<f64>::of_kind(LossKind::Focal);
    for _ in 0..10 {
        let z = common::random_logits(&mut r, 4, 4);
        let g = common::random_target(&mut r, 4, 4);
        let fine = finite_diff_check(&z, &g, &cfg, 1e-4).unwrap();
        let coarse = finite_diff_check(&z, &g, &cfg, 1e-2).unwrap();
        assert!(coarse > fine, "{coarse} vs {fine}");
    }
}

#[test]
fn confident_correct_focal_gradient_vanishes() {
    let classes = vec![0, 1, 2, 1];
    let g = OneHotTarget::new(2, 2, 3, classes.clone()).unwrap();
    let z = Tensor::new(
        2,
        2,
        3,
        classes
            .iter()
            .flat_map(|&c| (0..3).map(move |k| if k == c { 20.0 } else { -20.0 }))
            .collect(),
    )
    .unwrap();
    let grad = loss_grad(&z, &g, &LossConfig::of_kind(LossKind::Focal)).unwrap();
    assert!(grad.data().iter().all(|v: &f64| v.abs() <= 1e-3));
}

#[test]
fn uniform_logits_permutation_symmetry() {
    let z = tensor(2, 2, vec![0.0; 12]);
    let g = OneHotTarget::new(2, 2, 3, vec![0, 1, 2, 0]).unwrap();
    let perm = [2usize, 0, 1];
    let gp = OneHotTarget::new(2, 2, 3, g.classes().iter().map(|&c| perm[c as usize] as u8).collect()).unwrap();
    for kind in LossKind::ALL {
        let cfg = LossConfig::of_kind(kind);
        let a = loss_grad(&z, &g, &cfg).unwrap();
        let b = loss_grad(&z, &gp, &cfg).unwrap();
        for px in 0..4 {
            for (c, &pc) in perm.iter().enumerate() {
                let (x, y) = (a.data()[px * 3 + c], b.data()[px * 3 + pc]);
                assert!((x - y).abs() < 1e-12, "{kind:?}");
            }
        }
    }
}

#[test]
fn f32_and_f64_agree() {
    let mut r = common::rng(12);
    let z = common::random_logits(&mut r, 4, 4);
    let g = common::random_target(&mut r, 4, 4);
    for kind in LossKind::ALL {
        let hi = loss_eval(&softmax(&z).unwrap(), &g, &LossConfig::of_kind(kind)).unwrap();
        let lo = loss_eval(&softmax(&z.cast::<f32>()).unwrap(), &g, &LossConfig::<f32>::of_kind(kind)).unwrap();
        assert!((hi - lo as f64).abs() < 1e-5, "{kind:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn losses_are_nonnegative((z, c) in logits_strategy(3, 3)) {
        let p = softmax(&tensor(3, 3, z)).unwrap();
        let g = OneHotTarget::new(3, 3, 3, c).unwrap();
        for kind in LossKind::ALL {
            prop_assert!(loss_eval(&p, &g, &LossConfig::of_kind(kind)).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn dice_never_exceeds_jaccard((z, c) in logits_strategy(3, 4)) {
        let p = softmax(&tensor(3, 4, z)).unwrap();
        let g = OneHotTarget::new(3, 4, 3, c).unwrap();
        let d = loss_eval(&p, &g, &LossConfig::of_kind(LossKind::Dice)).unwrap();
        let j = loss_eval(&p, &g, &LossConfig::of_kind(LossKind::Jaccard)).unwrap();
        prop_assert!(d <= j + 1e-12);
    }

    #[test]
    fn balanced_tversky_is_dice((z, c) in logits_strategy(4, 4)) {
        let p = softmax(&tensor(4, 4, z)).unwrap();
        let g = OneHotTarget::new(4, 4, 3, c).unwrap();
        let d = loss_eval(&p, &g, &LossConfig::of_kind(LossKind::Dice)).unwrap();
        let t = loss_eval(&p, &g, &LossConfig {
            tversky_alpha: 0.5,
            tversky_beta: 0.5,
            ..LossConfig::of_kind(LossKind::Tversky)
        }).unwrap();
        prop_assert!((d - t).abs() <= 1e-7, "{}", (d - t).abs());
    }

    #[test]
    fn channel_permutation_leaves_loss_unchanged((z, c) in logits_strategy(2, 3)) {
        let perm = [1usize, 2, 0];
        let zp: Vec<f64> = z.chunks(3).flat_map(|px| {
            let mut out = [0.0; 3];
            for k in 0..3 { out[perm[k]] = px[k]; }
            out
        }).collect();
        let cp: Vec<u8> = c.iter().map(|&k| perm[k as usize] as u8).collect();
        let g = OneHotTarget::new(2, 3, 3, c).unwrap();
        let gp = OneHotTarget::new(2, 3, 3, cp).unwrap();
        for kind in LossKind::ALL {
            let cfg = LossConfig::of_kind(kind);
            let a = loss_eval(&softmax(&tensor(2, 3, z.clone())).unwrap(), &g, &cfg).unwrap();
            let b = loss_eval(&softmax(&tensor(2, 3, zp.clone())).unwrap(), &gp, &cfg).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(z in prop::collection::vec(-50.0f64..50.0, 30)) {
        let p = softmax(&tensor(2, 5, z)).unwrap();
        for px in p.pixels() {
            prop_assert!((px.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(px.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
