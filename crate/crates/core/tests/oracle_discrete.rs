mod support;

use support::{discrete_deltas, discrete_instance, rng, Family, FAMILIES};

#[test]
fn every_family_matches_enumeration() {
    for (i, fam) in FAMILIES.into_iter().enumerate() {
        let mut r = rng(100 + i as u64);
        for case in 0..12 {
            let (m, v) = discrete_instance(fam, &mut r);
            let d = discrete_deltas(&m, &v).unwrap();
            let ctx = format!("{fam:?} case {case}: {d:?}");
            assert!(d.regime_marginal < 1e-10, "{ctx}");
            assert!(d.state_marginal < 1e-10, "{ctx}");
            assert!(d.normalizer < 1e-10, "{ctx}");
            if let Some(hit) = d.viterbi_match {
                assert!(hit, "{ctx}");
                assert!(d.viterbi_log_joint < 1e-10, "{ctx}");
            }
        }
    }
}

#[test]
fn viterbi_coverage() {
    let mut r = rng(1);
    for fam in [Family::Hmm(0), Family::Hmm(2), Family::Gmm, Family::Dc, Family::Segmental] {
        let (m, v) = discrete_instance(fam, &mut r);
        assert!(discrete_deltas(&m, &v).unwrap().viterbi_match.is_some(), "{fam:?}");
    }
    for fam in [Family::GmmChained, Family::Ic, Family::IcCut] {
        let (m, v) = discrete_instance(fam, &mut r);
        assert!(discrete_deltas(&m, &v).unwrap().viterbi_match.is_none(), "{fam:?}");
    }
}
