use echo_lab::objective::{binarize, dice_loss, iou, pit_height_loss, total_loss, LossWeights, Orientation};
use proptest::prelude::*;

fn mask(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|b| b as u8 as f64), len)
}

proptest! {
    #[test]
    fn dice_and_iou_agree_on_masks(p in mask(64), t in mask(64)) {
        let inter = p.iter().zip(&t).filter(|(a, b)| **a == 1.0 && **b == 1.0).count() as f64;
        let (sp, st) = (p.iter().sum::<f64>(), t.iter().sum::<f64>());
        let d = dice_loss(&p, &t).unwrap();
        let i = iou(&p, &t).unwrap();
        prop_assert!((0.0..=1.0).contains(&d) && (0.0..=1.0).contains(&i));
        if sp + st > 0.0 {
            // Dice and IOU are monotone transforms of each other on hard masks.
            let dice_score = 2.0 * inter / (sp + st);
            prop_assert!((i - dice_score / (2.0 - dice_score)).abs() < 1e-12);
            prop_assert_eq!(d == 0.0, i == 1.0);
        }
    }

    #[test]
    fn pit_loss_is_min_over_orientations(pred in prop::collection::vec(0.0f64..1.0, 1..40), seed in any::<u64>()) {
        let t: Vec<f64> = (0..pred.len()).map(|k| ((seed >> (k % 64)) & 1) as f64).collect();
        let rev: Vec<f64> = t.iter().rev().copied().collect();
        let mse = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
        let (l, o) = pit_height_loss(&pred, &t).unwrap();
        prop_assert_eq!(l, mse(&pred, &t).min(mse(&pred, &rev)));
        prop_assert_eq!(o == Orientation::Flipped, mse(&pred, &rev) < mse(&pred, &t));
        prop_assert_eq!(pit_height_loss(&pred, &rev).unwrap().0, l);
    }

    #[test]
    fn total_loss_nonnegative_and_zero_at_truth(p in prop::collection::vec(0.0f64..1.0, 16), t in mask(16), h in prop::collection::vec(0.0f64..1.0, 8), ht in mask(8)) {
        let w = LossWeights::default();
        let parts = total_loss(&p, &h, &t, &ht, w).unwrap();
        prop_assert!(parts.total >= 0.0);
        prop_assert!((parts.total - (parts.mse_lw + w.alpha * parts.dice_lw + w.beta * parts.mse_h)).abs() < 1e-12);
        let exact = total_loss(&t, &ht, &t, &ht, w).unwrap();
        prop_assert_eq!(exact.mse_lw, 0.0);
        prop_assert_eq!(exact.mse_h, 0.0);
    }

    #[test]
    fn binarize_thresholds_at_half_inclusive(p in prop::collection::vec(0.0f64..1.0, 1..50)) {
        let b = binarize(&p);
        for (v, bit) in p.iter().zip(b) {
            prop_assert_eq!(bit == 1, *v >= 0.5);
        }
    }
}

#[test]
fn shape_mismatch_is_an_error() {
    assert!(dice_loss(&[1.0], &[1.0, 0.0]).is_err());
    assert!(iou(&[], &[0.0]).is_err());
}
