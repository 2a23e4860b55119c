use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{
    DurationLaw, DurationSpec, FilterMode, LinearGaussianEmission, LinearGaussianRegime, SlgssmVariant,
    TransitionModel,
};

fn spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
    &a * a.transpose() + DMatrix::identity(n, n) * floor
}

pub(crate) fn random_regime(rng: &mut ChaCha8Rng, h: usize, d: usize) -> LinearGaussianRegime {
    LinearGaussianRegime {
        transition: DMatrix::from_fn(h, h, |_, _| rng.random_range(-0.8..0.8)),
        observation: DMatrix::from_fn(d, h, |_, _| rng.random_range(-1.0..1.0)),
        process_cov: spd(rng, h, 0.2),
        obs_cov: spd(rng, d, 0.3),
        reset_mean: DVector::from_fn(h, |_, _| rng.random_range(-1.0..1.0)),
        reset_cov: spd(rng, h, 0.5),
    }
}

fn random_transition(rng: &mut ChaCha8Rng, s: usize) -> TransitionModel {
    let init: Vec<f64> = (0..s).map(|_| rng.random_range(0.2..1.0)).collect();
    let tot: f64 = init.iter().sum();
    let mut rows = vec![vec![0.0; s]; s];
    for i in 0..s {
        let w: Vec<f64> = (0..s).map(|_| rng.random_range(0.1..1.0)).collect();
        let z: f64 = w.iter().sum();
        for j in 0..s {
            rows[j][i] = w[j] / z;
        }
    }
    TransitionModel::from_rows(init.iter().map(|x| x / tot).collect(), &rows).unwrap()
}

fn random_law(rng: &mut ChaCha8Rng, s: usize, dmax: usize) -> DurationLaw {
    let specs = (0..s)
        .map(|_| {
            let w: Vec<f64> = (0..dmax).map(|_| rng.random_range(0.1..1.0)).collect();
            let z: f64 = w.iter().sum();
            DurationSpec::new(1, dmax, w.iter().map(|x| x / z).collect()).unwrap()
        })
        .collect();
    DurationLaw::per_regime(specs).unwrap()
}

pub(crate) fn random_model(
    rng: &mut ChaCha8Rng,
    variant: SlgssmVariant,
    s: usize,
    h: usize,
    d: usize,
    dmax: usize,
) -> SlgssmModel {
    let regimes = (0..s).map(|_| random_regime(rng, h, d)).collect();
    let law = match variant {
        SlgssmVariant::Plain | SlgssmVariant::ChangePoint => None,
        _ => Some(random_law(rng, s, dmax)),
    };
    SlgssmModel::new(random_transition(rng, s), LinearGaussianEmission::new(regimes).unwrap(), law, variant).unwrap()
}

fn random_series(rng: &mut ChaCha8Rng, n: usize, d: usize) -> TimeSeries {
    let data = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    TimeSeries::new(data, n, d).unwrap()
}

fn close(a: &GaussianBelief, b: &GaussianBelief, tol: f64) -> bool {
    (&a.mean - &b.mean).amax() < tol && (&a.cov - &b.cov).amax() < tol
}

#[test]
fn single_regime_is_kalman() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for variant in [SlgssmVariant::Plain, SlgssmVariant::Dc] {
        let m = random_model(&mut rng, variant, 1, 2, 1, 1);
        let v = random_series(&mut rng, 12, 1);
        let out = slgssm_filter(&m, &v).unwrap();
        let reg = m.emission.regime(0);
        let mut b = reset_correct(reg, v.row(0)).unwrap().belief;
        let mut ll = reset_correct(reg, v.row(0)).unwrap().log_lik;
        assert!(close(out.states[0].beliefs[0].as_ref().unwrap(), &b, 1e-12));
        for t in 1..12 {
            let (nb, l) = kalman_predict_correct(&b, reg, v.row(t)).unwrap();
            b = nb;
            ll += l;
            assert!(close(out.states[t].beliefs[0].as_ref().unwrap(), &b, 1e-12));
        }
        assert!((out.log_likelihood - ll).abs() < 1e-10);
    }
}

#[test]
fn identical_regimes_follow_the_markov_prior() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut m = random_model(&mut rng, SlgssmVariant::Plain, 3, 2, 2, 1);
    let r0 = m.emission.regime(0).clone();
    m.emission = LinearGaussianEmission::new(vec![r0.clone(), r0.clone(), r0]).unwrap();
    let v = random_series(&mut rng, 8, 2);
    let out = slgssm_filter(&m, &v).unwrap();
    let mut prior: Vec<f64> = m.transition.initial().to_vec();
    for st in &out.states {
        for s in 0..3 {
            assert!((st.log_weights[s].exp() - prior[s]).abs() < 1e-12);
            assert!(close(st.beliefs[s].as_ref().unwrap(), st.beliefs[0].as_ref().unwrap(), 1e-12));
        }
        prior = (0..3).map(|j| (0..3).map(|i| m.transition.p(j, i) * prior[i]).sum()).collect();
    }
}

#[test]
fn factored_dc_matches_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let m = random_model(&mut rng, SlgssmVariant::Dc, 3, 2, 1, 4);
        let v = random_series(&mut rng, 15, 1);
        let a = dur_filter_dc(&m, &v).unwrap();
        let b = dur_filter_dc_naive(&m, &v).unwrap();
        assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-12);
        for (x, y) in a.states.iter().zip(&b.states) {
            for sigma in 0..x.log_weights.len() {
                assert!((x.log_weights[sigma].exp() - y.log_weights[sigma].exp()).abs() < 1e-12);
                if let (Some(p), Some(q)) = (&x.beliefs[sigma], &y.beliefs[sigma]) {
                    assert!(close(p, q, 1e-12));
                }
            }
        }
    }
}

#[test]
fn dc_with_unit_durations_is_plain() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut m = random_model(&mut rng, SlgssmVariant::Dc, 2, 1, 1, 1);
    let v = random_series(&mut rng, 10, 1);
    let dc = dur_filter_dc(&m, &v).unwrap();
    m.variant = SlgssmVariant::Plain;
    m.durations = None;
    let plain = slgssm_filter(&m, &v).unwrap();
    assert!((dc.log_likelihood - plain.log_likelihood).abs() < 1e-12);
    for (x, y) in dc.states.iter().zip(&plain.states) {
        for s in 0..2 {
            assert!((x.log_weights[s] - y.log_weights[s]).abs() < 1e-12);
            assert!(close(x.beliefs[s].as_ref().unwrap(), y.beliefs[s].as_ref().unwrap(), 1e-12));
        }
    }
}

#[test]
fn first_step_is_corrected_reset_prior() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for mode in [FilterMode::Collapsed, FilterMode::Exact] {
        let m = random_model(&mut rng, SlgssmVariant::DcReset, 2, 2, 1, 2).with_mode(mode);
        let v = random_series(&mut rng, 1, 1);
        let out = dur_filter_dc_reset(&m, &v).unwrap();
        for sigma in 0..4 {
            let r = reset_correct(m.emission.regime(out.space.regime(sigma)), v.row(0)).unwrap();
            assert!(close(out.states[0].beliefs[sigma].as_ref().unwrap(), &r.belief, 1e-12));
        }
    }
}

#[test]
fn exact_and_collapsed_agree_for_increasing_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..5 {
        let m = random_model(&mut rng, SlgssmVariant::IcReset, 2, 2, 1, 3);
        let v = random_series(&mut rng, 9, 1);
        let a = dur_filter_ic_reset(&m, &v).unwrap();
        let b = dur_filter_ic_reset(&m.clone().with_mode(FilterMode::Exact), &v).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            for sigma in 0..x.log_weights.len() {
                assert!((x.log_weights[sigma] - y.log_weights[sigma]).abs() < 1e-10);
                match (&x.beliefs[sigma], &y.beliefs[sigma]) {
                    (Some(p), Some(q)) => assert!(close(p, q, 1e-10)),
                    (None, None) => {}
                    _ => panic!("reachability differs"),
                }
            }
            assert!(y.mixtures.as_ref().unwrap().iter().all(|m| m.len() <= 1));
        }
    }
}

#[test]
fn exact_component_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 6;
    let v = random_series(&mut rng, n, 1);
    let cp = random_model(&mut rng, SlgssmVariant::ChangePoint, 2, 1, 1, 1).with_mode(FilterMode::Exact);
    let out = changepoint_two_state(&cp, &v).unwrap();
    for (t, st) in out.states.iter().enumerate() {
        assert_eq!(st.n_components(), 2 * (t + 1));
    }
    let dc = random_model(&mut rng, SlgssmVariant::DcReset, 2, 1, 1, n).with_mode(FilterMode::Exact);
    let out = dur_filter_dc_reset(&dc, &v).unwrap();
    for (t, st) in out.states.iter().enumerate() {
        let most = st.mixtures.as_ref().unwrap().iter().map(Vec::len).max().unwrap();
        assert_eq!(most, t + 1);
    }
    let ic = random_model(&mut rng, SlgssmVariant::IcReset, 2, 1, 1, 3).with_mode(FilterMode::Exact);
    let out = dur_filter_ic_reset(&ic, &v).unwrap();
    assert!(out.states.iter().all(|st| st.n_components() == 2 * 3));
}

#[test]
fn mixture_cap_is_enforced() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut m = random_model(&mut rng, SlgssmVariant::ChangePoint, 2, 1, 1, 1).with_mode(FilterMode::Exact);
    m.mixture_cap = 5;
    let v = random_series(&mut rng, 4, 1);
    assert!(matches!(changepoint_two_state(&m, &v), Err(Error::MixtureCapExceeded { components: 6, cap: 5 })));
}

#[test]
fn exact_mode_needs_resets() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = random_model(&mut rng, SlgssmVariant::Plain, 2, 1, 1, 1).with_mode(FilterMode::Exact);
    let v = random_series(&mut rng, 3, 1);
    assert!(matches!(slgssm_filter(&m, &v), Err(Error::Contract(_))));
}

#[test]
fn always_switching_changepoint_resets_every_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut m = random_model(&mut rng, SlgssmVariant::ChangePoint, 2, 1, 1, 1);
    m.transition = TransitionModel::from_rows(vec![0.5, 0.5], &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let v = random_series(&mut rng, 6, 1);
    let out = changepoint_two_state(&m, &v).unwrap();
    for (t, st) in out.states.iter().enumerate() {
        for s in 0..2 {
            assert_eq!(st.log_weights[s * 2 + 1], f64::NEG_INFINITY);
            let r = reset_correct(m.emission.regime(s), v.row(t)).unwrap();
            assert!(close(st.beliefs[s * 2].as_ref().unwrap(), &r.belief, 1e-12));
        }
    }
}

#[test]
fn single_regime_smoother_is_rts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = random_model(&mut rng, SlgssmVariant::Plain, 1, 2, 1, 1);
    let v = random_series(&mut rng, 10, 1);
    let f = slgssm_filter(&m, &v).unwrap();
    let sm = slgssm_smooth(&f, &m).unwrap();
    let reg = m.emission.regime(0);
    let mut next = f.states[9].beliefs[0].clone().unwrap();
    for t in (0..9).rev() {
        let fb = f.states[t].beliefs[0].as_ref().unwrap();
        let (pm, pp) = predict(fb, reg);
        let j = &fb.cov * reg.transition.transpose() * pp.clone().try_inverse().unwrap();
        let mean = &fb.mean + &j * (&next.mean - &pm);
        let cov = &fb.cov + &j * (&next.cov - &pp) * j.transpose();
        let rts = GaussianBelief::new(mean, cov);
        assert!(close(sm[t].beliefs[0].as_ref().unwrap(), &rts, 1e-9));
        next = rts;
    }
}

#[test]
fn smoothed_last_step_equals_filtered_and_weights_normalize() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for variant in [SlgssmVariant::Plain, SlgssmVariant::Dc, SlgssmVariant::IcReset, SlgssmVariant::ChangePoint] {
        let m = random_model(&mut rng, variant, 2, 2, 1, 3);
        let v = random_series(&mut rng, 8, 1);
        let f = slgssm_filter(&m, &v).unwrap();
        let sm = slgssm_smooth(&f, &m).unwrap();
        assert_eq!(sm[7].log_weights, f.states[7].log_weights);
        for st in &sm {
            assert!((st.weights().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn smoother_rejects_mismatch_and_dc_reset() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let m = random_model(&mut rng, SlgssmVariant::DcReset, 2, 1, 1, 2);
    let v = random_series(&mut rng, 4, 1);
    let f = slgssm_filter(&m, &v).unwrap();
    assert!(matches!(slgssm_smooth(&f, &m), Err(Error::Contract(_))));
    let mut other = m.clone();
    other.variant = SlgssmVariant::Dc;
    assert!(matches!(slgssm_smooth(&f, &other), Err(Error::Contract(_))));
}

#[test]
fn pruning_off_by_default_and_harmless_when_on() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let m = random_model(&mut rng, SlgssmVariant::Plain, 2, 1, 1, 1);
    let v = random_series(&mut rng, 10, 1);
    assert!(!FilterOptions::default().prune);
    let a = slgssm_filter(&m, &v).unwrap();
    let b = slgssm_filter_with(&m, &v, FilterOptions { prune: true }).unwrap();
    assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-9);
}
