mod support;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn normalization(seed in any::<u64>()) {
        let r = support::prop_normalization(seed);
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn alpha_beta_constancy(seed in any::<u64>()) {
        let r = support::prop_alpha_beta(seed);
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn parallel_equals_sequential(seed in any::<u64>()) {
        let r = support::prop_parallel_sequential(seed);
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn hazard_round_trip(seed in any::<u64>()) {
        let r = support::prop_hazard_round_trip(seed);
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn single_regime_is_kalman_and_rts(seed in any::<u64>()) {
        let r = support::prop_single_regime_kalman(seed);
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn collapse_preserves_moments(seed in any::<u64>()) {
        let r = support::prop_collapse_moments(seed);
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn exact_component_counts(seed in any::<u64>()) {
        let r = support::prop_exact_component_counts(seed);
        prop_assert!(r.is_ok(), "{:?}", r);
    }
}
