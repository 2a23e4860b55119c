mod support;

use switchseg::model::SlgssmVariant;
use support::{collapsed_filter_deltas, continuous_instance, exact_deltas, rng, ALL_VARIANTS, RESET_VARIANTS};

#[test]
fn exact_modes_match_the_mixture_oracle() {
    for (i, variant) in RESET_VARIANTS.into_iter().enumerate() {
        let mut r = rng(200 + i as u64);
        for case in 0..15 {
            let (m, v) = continuous_instance(variant, &mut r);
            let d = exact_deltas(&m, &v).unwrap();
            let ctx = format!("{variant:?} case {case}: {d:?}");
            assert!(!d.count_mismatch, "{ctx}");
            assert!(d.weight < 1e-10 && d.moments < 1e-10 && d.log_likelihood < 1e-10, "{ctx}");
        }
    }
}

#[test]
fn collapsing_is_lossless_for_increasing_counts_with_resets() {
    let mut r = rng(300);
    for _ in 0..15 {
        let (m, v) = continuous_instance(SlgssmVariant::IcReset, &mut r);
        let d = collapsed_filter_deltas(&m, &v, usize::MAX).unwrap();
        assert!(d.weight < 1e-9 && d.moments < 1e-6, "{d:?}");
    }
}

#[test]
fn collapsing_is_lossless_for_two_steps() {
    for (i, variant) in ALL_VARIANTS.into_iter().enumerate() {
        let mut r = rng(400 + i as u64);
        for _ in 0..10 {
            let (m, v) = continuous_instance(variant, &mut r);
            let d = collapsed_filter_deltas(&m, &v, 2).unwrap();
            assert!(d.weight < 1e-9 && d.moments < 1e-6, "{variant:?} {d:?}");
        }
    }
}
