//! Random instances and checks shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use switchseg::discrete::{smooth_gmm, smooth_gmm_chained, smooth_parallel, smooth_sequential, viterbi};
use switchseg::duration::{dc_smooth, dc_viterbi, ic_smooth, CountIndexedTables};
use switchseg::math::log_sum_exp;
use switchseg::model::{
    hazard_to_pmf, pmf_to_hazard, Boundary, DurationSpec, Emission, FilterMode, HmmModel, Model, SegmentEnd,
    SlgssmModel, SlgssmVariant, TimeSeries,
};
use switchseg::oracle::{enumerate_discrete, exact_mixture_filter, HiddenConfig};
use switchseg::segmental::{emission_segments, seg_smooth, seg_viterbi};
use switchseg::slgssm::{collapse, slgssm_filter, slgssm_smooth, FilterOutput};
use switchseg::synth::instances::{
    random_ar, random_duration, random_emission, random_gmm, random_hmm, random_segmental, random_series,
    random_slgssm,
};
use switchseg::model::ArStart;

pub type Check = std::result::Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Hmm(usize),
    Gmm,
    GmmChained,
    Dc,
    Ic,
    IcCut,
    Segmental,
}

pub const FAMILIES: [Family; 9] = [
    Family::Hmm(0),
    Family::Hmm(1),
    Family::Hmm(2),
    Family::Gmm,
    Family::GmmChained,
    Family::Dc,
    Family::Ic,
    Family::IcCut,
    Family::Segmental,
];

fn random_start<R: Rng>(rng: &mut R) -> ArStart {
    match rng.random_range(0..3) {
        0 => ArStart::Conditional,
        1 => ArStart::Truncated,
        _ => ArStart::Gaussian { mean: 0.0, var: 1.5 },
    }
}

fn boundary<R: Rng>(rng: &mut R) -> Boundary {
    if rng.random_bool(0.5) {
        Boundary::Relaxed
    } else {
        Boundary::Strict
    }
}

/// `S ≤ 3`, `T ≤ 8`, `d_max ≤ 4`, `M ≤ 2`; the model admits at least one path for the series.
pub fn discrete_instance<R: Rng>(family: Family, rng: &mut R) -> (Model, TimeSeries) {
    loop {
        let s = rng.random_range(1..=3);
        let n = rng.random_range(2..=8);
        let dm = rng.random_range(1..=4);
        let k = rng.random_range(0..=2);
        let m = rng.random_range(1..=2);
        let model = match family {
            Family::Hmm(0) => {
                let em = Emission::Gmm(random_gmm(rng, s, 1, false));
                Model::HmmGmm(random_hmm(rng, s, em))
            }
            Family::Hmm(k) => {
                let start = random_start(rng);
                let em = Emission::Ar(random_ar(rng, s, k, start));
                Model::Sarm(random_hmm(rng, s, em))
            }
            Family::Gmm | Family::GmmChained => {
                let em = Emission::Gmm(random_gmm(rng, s, 2, family == Family::GmmChained));
                Model::HmmGmm(random_hmm(rng, s, em))
            }
            Family::Dc => {
                let em = random_emission(rng, s, k, m);
                let b = boundary(rng);
                Model::DurationDc(random_duration(rng, s, dm, em, b, false))
            }
            Family::Ic | Family::IcCut => {
                let em = random_emission(rng, s, k, m);
                let b = boundary(rng);
                Model::DurationIc(random_duration(rng, s, dm, em, b, family == Family::IcCut))
            }
            Family::Segmental => {
                let em = random_emission(rng, s, k, m);
                let b = boundary(rng);
                let end = if rng.random_bool(0.5) { SegmentEnd::Truncated } else { SegmentEnd::Complete };
                Model::Segmental(random_segmental(rng, s, dm, em, b, end))
            }
        };
        let v = random_series(rng, n, 1);
        if enumerate_discrete(&model, &v).is_ok() {
            return (model, v);
        }
    }
}

/// Largest deviations of the fast recursions from enumeration on one instance.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiscreteDeltas {
    pub regime_marginal: f64,
    pub state_marginal: f64,
    pub normalizer: f64,
    /// `None` when the family has no Viterbi decoder.
    pub viterbi_match: Option<bool>,
    pub viterbi_log_joint: f64,
}

fn max_abs(a: f64, b: f64) -> f64 {
    a.max(b.abs())
}

pub fn discrete_deltas(model: &Model, v: &TimeSeries) -> std::result::Result<DiscreteDeltas, String> {
    let orc = enumerate_discrete(model, v).map_err(|e| e.to_string())?;
    let mut d = DiscreteDeltas::default();
    let fine = |t: usize, cfg: HiddenConfig, p: f64, acc: &mut f64| {
        *acc = max_abs(*acc, p - orc.marginal(t, cfg));
    };
    let n = v.len();
    let err = |e: switchseg::Error| e.to_string();
    let count_tables = |tab: &CountIndexedTables, d: &mut DiscreteDeltas| {
        d.regime_marginal = orc.max_marginal_delta(&tab.gamma_s);
        d.normalizer = (tab.log_likelihood - orc.log_normalizer).abs();
        let (_, s_n, dm) = tab.gamma_sc.dim();
        for t in 0..n {
            for s in 0..s_n {
                for c in 1..=dm {
                    fine(t, (s, c, 0), tab.gamma_sc[[t, s, c - 1]], &mut d.state_marginal);
                }
            }
        }
    };
    let path_check = |configs: Vec<HiddenConfig>, lj: f64, d: &mut DiscreteDeltas| {
        let hit = configs == orc.argmax_path || orc.ties.iter().any(|p| *p == configs);
        d.viterbi_match = Some(hit);
        d.viterbi_log_joint = (lj - orc.argmax_log_joint).abs();
    };
    match model {
        Model::HmmGmm(m) | Model::Sarm(m) => {
            let (gamma, ll) = match &m.emission {
                Emission::Gmm(g) => {
                    let p = if g.chain().is_some() {
                        smooth_gmm_chained(&m.transition, g, v).map_err(err)?
                    } else {
                        smooth_gmm(&m.transition, g, v).map_err(err)?
                    };
                    for t in 0..n {
                        for s in 0..g.n_regimes() {
                            for c in 0..g.n_components() {
                                fine(t, (s, c, 0), p.gamma_sm[[t, s, c]], &mut d.state_marginal);
                            }
                        }
                    }
                    (p.gamma, p.log_likelihood)
                }
                e => {
                    let ll = e.log_lik_table(v).map_err(err)?;
                    let p = smooth_parallel(&m.transition, &ll).map_err(err)?;
                    for t in 0..n {
                        for s in 0..m.transition.n_regimes() {
                            fine(t, (s, 0, 0), p.gamma[[t, s]], &mut d.state_marginal);
                        }
                    }
                    (p.gamma, p.log_likelihood)
                }
            };
            d.regime_marginal = orc.max_marginal_delta(&gamma);
            d.normalizer = (ll - orc.log_normalizer).abs();
            let chained = matches!(&m.emission, Emission::Gmm(g) if g.chain().is_some());
            if !chained {
                let ll = m.emission.log_lik_table(v).map_err(err)?;
                let vit = viterbi(&m.transition, &ll).map_err(err)?;
                let regimes: Vec<usize> = orc.argmax_regimes();
                let hit = vit.path == regimes || orc.ties.iter().any(|p| p.iter().map(|c| c.0).eq(vit.path.iter().copied()));
                d.viterbi_match = Some(hit);
                d.viterbi_log_joint = (vit.log_joint - orc.argmax_log_joint).abs();
            }
        }
        Model::DurationDc(m) => {
            count_tables(&dc_smooth(m, v).map_err(err)?, &mut d);
            let p = dc_viterbi(m, v).map_err(err)?;
            let cfgs = p.regimes.iter().zip(&p.counts).map(|(&s, &c)| (s, c, 0)).collect();
            path_check(cfgs, p.log_joint, &mut d);
        }
        Model::DurationIc(m) => count_tables(&ic_smooth(m, v).map_err(err)?, &mut d),
        Model::Segmental(m) => {
            let (tables, post) = seg_smooth(m, v, true).map_err(err)?;
            d.regime_marginal = orc.max_marginal_delta(&post.gamma_s);
            d.normalizer = (tables.log_likelihood - orc.log_normalizer).abs();
            let (_, s_n, dm) = post.gamma_sc.dim();
            for t in 0..n {
                for s in 0..s_n {
                    for c in 1..=dm {
                        let want: f64 = (c..=dm).map(|dd| orc.marginal(t, (s, dd, c))).sum();
                        d.state_marginal = max_abs(d.state_marginal, post.gamma_sc[[t, s, c - 1]] - want);
                    }
                }
            }
            let provider = emission_segments(&m.emission, v).map_err(err)?;
            let p = seg_viterbi(m, provider.as_ref()).map_err(err)?;
            let cfgs = (0..n).map(|t| (p.regimes[t], p.durations[t], p.counts[t])).collect();
            path_check(cfgs, p.log_joint, &mut d);
        }
        Model::Slgssm(_) => return Err("not a discrete model".into()),
    }
    Ok(d)
}

pub const RESET_VARIANTS: [SlgssmVariant; 3] =
    [SlgssmVariant::IcReset, SlgssmVariant::ChangePoint, SlgssmVariant::DcReset];
pub const ALL_VARIANTS: [SlgssmVariant; 5] = [
    SlgssmVariant::Plain,
    SlgssmVariant::Dc,
    SlgssmVariant::DcReset,
    SlgssmVariant::IcReset,
    SlgssmVariant::ChangePoint,
];

/// `S = 2`, `H, D ∈ {1, 2}`, `T ≤ 5`, `d_max ≤ 3`.
pub fn continuous_instance<R: Rng>(variant: SlgssmVariant, rng: &mut R) -> (SlgssmModel, TimeSeries) {
    let h = rng.random_range(1..=2);
    let d = rng.random_range(1..=2);
    let n = rng.random_range(2..=5);
    let dm = rng.random_range(1..=3);
    let m = random_slgssm(rng, variant, 2, h, d, dm);
    (m, random_series(rng, n, d))
}

fn mat_delta(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

fn vec_delta(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).abs().max()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ContinuousDeltas {
    pub weight: f64,
    pub moments: f64,
    pub log_likelihood: f64,
    pub count_mismatch: bool,
}

/// Exact-mode mixtures against the oracle's components, matched by configuration and reset time.
pub fn exact_deltas(model: &SlgssmModel, v: &TimeSeries) -> std::result::Result<ContinuousDeltas, String> {
    let model = model.clone().with_mode(FilterMode::Exact);
    let ours = slgssm_filter(&model, v).map_err(|e| e.to_string())?;
    let orc = exact_mixture_filter(&model, v).map_err(|e| e.to_string())?;
    let mut d = ContinuousDeltas { log_likelihood: (ours.log_likelihood - orc.log_likelihood).abs(), ..Default::default() };
    for (t, step) in orc.filtered.iter().enumerate() {
        let st = &ours.states[t];
        let mix = st.mixtures.as_ref().ok_or("exact mode without mixtures")?;
        if st.n_components() != step.n_components() {
            d.count_mismatch = true;
        }
        for c in &step.components {
            let sigma = ours.space.index(c.config.0, c.config.1);
            let Some(mc) = mix[sigma].iter().find(|m| m.reset_time == c.reset_time) else {
                d.count_mismatch = true;
                continue;
            };
            let w = (st.log_weights[sigma] + mc.belief.log_weight).exp();
            d.weight = d.weight.max((w - c.weight).abs());
            d.moments = d.moments.max(vec_delta(&mc.belief.mean, &c.mean)).max(mat_delta(&mc.belief.cov, &c.cov));
        }
    }
    Ok(d)
}

/// Collapsed filtering against the oracle's per-configuration moments for steps `< horizon`.
pub fn collapsed_filter_deltas(
    model: &SlgssmModel,
    v: &TimeSeries,
    horizon: usize,
) -> std::result::Result<ContinuousDeltas, String> {
    let model = model.clone().with_mode(FilterMode::Collapsed);
    let ours = slgssm_filter(&model, v).map_err(|e| e.to_string())?;
    let orc = exact_mixture_filter(&model, v).map_err(|e| e.to_string())?;
    let mut d = ContinuousDeltas::default();
    for (t, step) in orc.filtered.iter().enumerate().take(horizon) {
        let st = &ours.states[t];
        for sigma in 0..ours.space.len() {
            let cfg = (ours.space.regime(sigma), ours.space.count(sigma));
            let w = st.log_weights[sigma].exp();
            match step.moments(cfg) {
                Some(m) => {
                    d.weight = d.weight.max((w - m.weight).abs());
                    if let Some(b) = &st.beliefs[sigma] {
                        d.moments = d.moments.max(vec_delta(&b.mean, &m.mean)).max(mat_delta(&b.cov, &m.cov));
                    }
                }
                None => d.weight = d.weight.max(w),
            }
        }
    }
    Ok(d)
}

/// Smoothed configuration weights against the oracle; `None` when the smoother rejects the variant.
pub fn smoothed_weight_delta(model: &SlgssmModel, v: &TimeSeries) -> std::result::Result<Option<f64>, String> {
    let model = model.clone().with_mode(FilterMode::Collapsed);
    let filtered = slgssm_filter(&model, v).map_err(|e| e.to_string())?;
    let states = match slgssm_smooth(&filtered, &model) {
        Ok(s) => s,
        Err(switchseg::Error::Contract(_)) => return Ok(None),
        Err(e) => return Err(e.to_string()),
    };
    let orc = exact_mixture_filter(&model, v).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (t, st) in states.iter().enumerate() {
        for sigma in 0..filtered.space.len() {
            let cfg = (filtered.space.regime(sigma), filtered.space.count(sigma));
            let want = orc.smoothed_moments(t, cfg).map_or(0.0, |m| m.weight);
            worst = worst.max((st.log_weights[sigma].exp() - want).abs());
        }
    }
    Ok(Some(worst))
}

// Structural invariants, each driven by one seed.

fn row_sums_ok(g: &Array2<f64>) -> Check {
    for (t, r) in g.outer_iter().enumerate() {
        let s: f64 = r.sum();
        ensure((s - 1.0).abs() < 1e-9, || format!("row {t} sums to {s}"))?;
        ensure(r.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)), || format!("row {t} leaves [0, 1]"))?;
    }
    Ok(())
}

fn small_instance(seed: u64) -> (Model, TimeSeries) {
    let mut r = rng(seed);
    let f = FAMILIES[r.random_range(0..FAMILIES.len())];
    discrete_instance(f, &mut r)
}

/// Posterior rows of every discrete family and of the switching state-space filters sum to one.
pub fn prop_normalization(seed: u64) -> Check {
    let (model, v) = small_instance(seed);
    let s = switchseg::pipeline::smooth(&model, &v).map_err(|e| e.to_string())?;
    row_sums_ok(&s.gamma)?;
    let mut r = rng(seed ^ 0xA5A5);
    let variant = ALL_VARIANTS[r.random_range(0..ALL_VARIANTS.len())];
    let (m, v) = continuous_instance(variant, &mut r);
    let f = slgssm_filter(&m, &v).map_err(|e| e.to_string())?;
    row_sums_ok(&f.regime_weights())?;
    if let Ok(states) = slgssm_smooth(&f, &m) {
        row_sums_ok(&switchseg::slgssm::regime_weights(&f.space, &states))?;
    }
    Ok(())
}

fn alpha_beta_const(a: &ndarray::ArrayView2<f64>, b: &ndarray::ArrayView2<f64>, ll: f64, t: usize) -> Check {
    let cells: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x + y).collect();
    let z = log_sum_exp(&cells);
    ensure((z - ll).abs() < 1e-9 * ll.abs().max(1.0), || format!("t={t}: log Σ αβ = {z}, log-likelihood {ll}"))
}

/// `Σ α_t β_t` equals the likelihood at every step.
pub fn prop_alpha_beta(seed: u64) -> Check {
    let mut r = rng(seed);
    let fam = [Family::Hmm(0), Family::Hmm(2), Family::Dc, Family::Ic, Family::IcCut, Family::Segmental][r.random_range(0..6)];
    let (model, v) = discrete_instance(fam, &mut r);
    let err = |e: switchseg::Error| e.to_string();
    match &model {
        Model::HmmGmm(m) | Model::Sarm(m) => {
            let ll = m.emission.log_lik_table(&v).map_err(err)?;
            let p = smooth_parallel(&m.transition, &ll).map_err(err)?;
            for t in 0..v.len() {
                let a = p.log_alpha.row(t);
                let b = p.log_beta.row(t);
                alpha_beta_const(&a.insert_axis(ndarray::Axis(0)), &b.insert_axis(ndarray::Axis(0)), p.log_likelihood, t)?;
            }
        }
        Model::DurationDc(m) | Model::DurationIc(m) => {
            let p = if matches!(model, Model::DurationDc(_)) { dc_smooth(m, &v) } else { ic_smooth(m, &v) }.map_err(err)?;
            for t in 0..v.len() {
                let a = p.log_alpha.index_axis(ndarray::Axis(0), t);
                let b = p.log_beta.index_axis(ndarray::Axis(0), t);
                alpha_beta_const(&a, &b, p.log_likelihood, t)?;
            }
        }
        Model::Segmental(m) => {
            let (tables, post) = seg_smooth(m, &v, true).map_err(err)?;
            for (t, z) in post.log_normalizers.iter().enumerate() {
                let ll = tables.log_likelihood;
                ensure((z - ll).abs() < 1e-9 * ll.abs().max(1.0), || format!("t={t}: {z} vs {ll}"))?;
            }
        }
        Model::Slgssm(_) => unreachable!(),
    }
    Ok(())
}

/// Forward-backward and filter-then-correct smoothing give the same posteriors.
pub fn prop_parallel_sequential(seed: u64) -> Check {
    let mut r = rng(seed);
    let k = r.random_range(0..=3);
    let s = r.random_range(1..=4);
    let n = r.random_range(1..=30);
    let em = if k == 0 {
        Emission::Gmm(random_gmm(&mut r, s, 2, false))
    } else {
        let start = random_start(&mut r);
        Emission::Ar(random_ar(&mut r, s, k, start))
    };
    let m: HmmModel = random_hmm(&mut r, s, em);
    let v = random_series(&mut r, n, 1);
    let ll = m.emission.log_lik_table(&v).map_err(|e| e.to_string())?;
    let a = smooth_parallel(&m.transition, &ll).map_err(|e| e.to_string())?;
    let b = smooth_sequential(&m.transition, &ll).map_err(|e| e.to_string())?;
    let d = a.gamma.iter().zip(b.gamma.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ensure(d < 1e-10, || format!("parallel and sequential differ by {d}"))
}

/// `ρ → λ → ρ` is the identity.
pub fn prop_hazard_round_trip(seed: u64) -> Check {
    let mut r = rng(seed);
    let d_max = r.random_range(1..=40);
    let d_min = r.random_range(1..=d_max);
    let w: Vec<f64> = (d_min..=d_max).map(|_| if r.random_bool(0.2) { 0.0 } else { r.random_range(0.01..1.0) }).collect();
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return Ok(());
    }
    let spec = DurationSpec::new(d_min, d_max, w.iter().map(|x| x / total).collect()).map_err(|e| e.to_string())?;
    let back = hazard_to_pmf(&pmf_to_hazard(&spec)).map_err(|e| e.to_string())?;
    for d in 1..=d_max {
        let diff = (back[d - 1] - spec.rho(d)).abs();
        ensure(diff < 1e-12, || format!("ρ_{d}: {} vs {}", back[d - 1], spec.rho(d)))?;
    }
    let again = DurationSpec::from_hazard(&spec.hazard()).map_err(|e| e.to_string())?;
    for d in 1..=d_max {
        ensure((again.rho(d) - spec.rho(d)).abs() < 1e-12, || format!("from_hazard differs at {d}"))?;
    }
    Ok(())
}

/// With one regime the switching filter and smoother are the Kalman filter and RTS smoother.
pub fn prop_single_regime_kalman(seed: u64) -> Check {
    let mut r = rng(seed);
    let h = r.random_range(1..=3);
    let d = r.random_range(1..=2);
    let n = r.random_range(1..=12);
    let m = random_slgssm(&mut r, SlgssmVariant::Plain, 1, h, d, 1);
    let v = random_series(&mut r, n, d);
    let f: FilterOutput = slgssm_filter(&m, &v).map_err(|e| e.to_string())?;
    let sm = slgssm_smooth(&f, &m).map_err(|e| e.to_string())?;
    let orc = exact_mixture_filter(&m, &v).map_err(|e| e.to_string())?;
    let tol = 1e-9;
    ensure((f.log_likelihood - orc.log_likelihood).abs() < tol * orc.log_likelihood.abs().max(1.0), || {
        format!("log-likelihood {} vs {}", f.log_likelihood, orc.log_likelihood)
    })?;
    for t in 0..n {
        let a = f.states[t].beliefs[0].as_ref().ok_or("missing belief")?;
        let b = &orc.filtered[t].components[0];
        let dd = vec_delta(&a.mean, &b.mean).max(mat_delta(&a.cov, &b.cov));
        ensure(dd < tol, || format!("filtered t={t} off by {dd}"))?;
        let a = sm[t].beliefs[0].as_ref().ok_or("missing smoothed belief")?;
        let b = orc.smoothed_moments(t, (0, 1)).ok_or("missing oracle moments")?;
        let dd = vec_delta(&a.mean, &b.mean).max(mat_delta(&a.cov, &b.cov));
        ensure(dd < tol, || format!("smoothed t={t} off by {dd}"))?;
    }
    Ok(())
}

/// Collapsing preserves the mixture's mean and covariance.
pub fn prop_collapse_moments(seed: u64) -> Check {
    let mut r = rng(seed);
    let h = r.random_range(1..=4);
    let k = r.random_range(1..=6);
    let comps: Vec<(f64, DVector<f64>, DMatrix<f64>)> = (0..k)
        .map(|_| {
            let a = DMatrix::from_fn(h, h, |_, _| r.random_range(-1.0..1.0));
            (
                r.random_range(0.01..3.0),
                DVector::from_fn(h, |_, _| r.random_range(-5.0..5.0)),
                &a * a.transpose() + DMatrix::identity(h, h) * 0.1,
            )
        })
        .collect();
    let total: f64 = comps.iter().map(|c| c.0).sum();
    let mut mean = DVector::zeros(h);
    let mut second = DMatrix::zeros(h, h);
    for (w, m, p) in &comps {
        mean += m * (w / total);
        second += (p + m * m.transpose()) * (w / total);
    }
    let cov = second - &mean * mean.transpose();
    let got = collapse(comps.iter().map(|(w, m, p)| (*w, m, p))).ok_or("empty collapse")?;
    let dm = vec_delta(&got.mean, &mean);
    let dc = mat_delta(&got.cov, &cov);
    let scale = 1.0 + cov.abs().max() + mean.abs().max().powi(2);
    ensure(dm < 1e-10 * scale && dc < 1e-10 * scale, || format!("mean off by {dm}, cov off by {dc}"))
}

/// Exact mixtures hold `S t` (change-point), at most `t` per configuration (decreasing counts
/// with `d_max ≥ T`) and `S d_max` (increasing counts, `t ≥ d_max`) components.
pub fn prop_exact_component_counts(seed: u64) -> Check {
    let mut r = rng(seed);
    let s = r.random_range(2..=3);
    let n = r.random_range(1..=7);
    let v = random_series(&mut r, n, 1);
    let cp = random_slgssm(&mut r, SlgssmVariant::ChangePoint, s, 1, 1, 1).with_mode(FilterMode::Exact);
    let out = slgssm_filter(&cp, &v).map_err(|e| e.to_string())?;
    for (t, st) in out.states.iter().enumerate() {
        ensure(st.n_components() == s * (t + 1), || format!("change-point t={}: {} components", t + 1, st.n_components()))?;
    }
    let dc = random_slgssm(&mut r, SlgssmVariant::DcReset, s, 1, 1, n).with_mode(FilterMode::Exact);
    let out = slgssm_filter(&dc, &v).map_err(|e| e.to_string())?;
    for (t, st) in out.states.iter().enumerate() {
        let most = st.mixtures.as_ref().ok_or("no mixtures")?.iter().map(Vec::len).max().unwrap_or(0);
        ensure(most == t + 1, || format!("decreasing counts t={}: largest mixture {most}", t + 1))?;
    }
    let dm = r.random_range(1..=4);
    let ic = random_slgssm(&mut r, SlgssmVariant::IcReset, s, 1, 1, dm).with_mode(FilterMode::Exact);
    let out = slgssm_filter(&ic, &v).map_err(|e| e.to_string())?;
    for (t, st) in out.states.iter().enumerate() {
        ensure(st.n_components() == s * dm, || format!("increasing counts t={}: {} components", t + 1, st.n_components()))?;
    }
    Ok(())
}

pub const INVARIANTS: [(&str, fn(u64) -> Check); 7] = [
    ("normalization", prop_normalization),
    ("alpha-beta constancy", prop_alpha_beta),
    ("parallel = sequential", prop_parallel_sequential),
    ("hazard round-trip", prop_hazard_round_trip),
    ("Kalman/RTS at S=1", prop_single_regime_kalman),
    ("collapse moments", prop_collapse_moments),
    ("exact component counts", prop_exact_component_counts),
];
