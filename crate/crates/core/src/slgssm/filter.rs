//! Collapsing (assumed-density) filters over a configuration space.

use super::config::{ConfigSpace, Link};
use super::exact::exact_filter;
use super::kalman::{collapse, reset_correct, step, Correction, GaussianBelief};
use super::{check_series, FilterOutput, SwitchBeliefState};
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, normalize_log};
use crate::model::{FilterMode, SlgssmModel, SlgssmVariant, TimeSeries};

/// Branches whose weight within their target configuration falls below this are dropped when
/// pruning is enabled.
pub const PRUNE_BELOW: f64 = 1e-15;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterOptions {
    /// Drop branches below [`PRUNE_BELOW`] before moment matching.
    pub prune: bool,
}

/// Filters with the model's variant and mode.
pub fn slgssm_filter(model: &SlgssmModel, series: &TimeSeries) -> Result<FilterOutput> {
    slgssm_filter_with(model, series, FilterOptions::default())
}

pub fn slgssm_filter_with(model: &SlgssmModel, series: &TimeSeries, opts: FilterOptions) -> Result<FilterOutput> {
    check_series(model, series)?;
    let space = ConfigSpace::for_model(model)?;
    match (model.mode, model.variant) {
        (FilterMode::Exact, _) => exact_filter(model, space, series),
        (FilterMode::Collapsed, SlgssmVariant::Dc) => factored_dc(model, space, series, opts),
        (FilterMode::Collapsed, _) => collapsed_filter(model, space, series, opts),
    }
}

fn require(model: &SlgssmModel, variant: SlgssmVariant) -> Result<()> {
    if model.variant != variant {
        return Err(Error::Contract(format!("expected a {variant:?} model, got {:?}", model.variant)));
    }
    Ok(())
}

/// Decreasing-count filter with the entering mixture collapsed once per regime and shared by
/// every count.
pub fn dur_filter_dc(model: &SlgssmModel, series: &TimeSeries) -> Result<FilterOutput> {
    require(model, SlgssmVariant::Dc)?;
    if model.mode == FilterMode::Exact {
        return Err(Error::Contract("the decreasing-count filter without resets has no exact mode".into()));
    }
    check_series(model, series)?;
    factored_dc(model, ConfigSpace::for_model(model)?, series, FilterOptions::default())
}

/// Same filter summing every predecessor of every `(s, c)` separately.
pub fn dur_filter_dc_naive(model: &SlgssmModel, series: &TimeSeries) -> Result<FilterOutput> {
    require(model, SlgssmVariant::Dc)?;
    check_series(model, series)?;
    collapsed_filter(model, ConfigSpace::for_model(model)?, series, FilterOptions::default())
}

pub fn dur_filter_dc_reset(model: &SlgssmModel, series: &TimeSeries) -> Result<FilterOutput> {
    require(model, SlgssmVariant::DcReset)?;
    slgssm_filter(model, series)
}

/// Exact in either mode: every `(s, c)` carries a single Gaussian.
pub fn dur_filter_ic_reset(model: &SlgssmModel, series: &TimeSeries) -> Result<FilterOutput> {
    require(model, SlgssmVariant::IcReset)?;
    slgssm_filter(model, series)
}

pub fn changepoint_two_state(model: &SlgssmModel, series: &TimeSeries) -> Result<FilterOutput> {
    require(model, SlgssmVariant::ChangePoint)?;
    slgssm_filter(model, series)
}

pub(crate) struct Resets {
    pub corr: Vec<Correction>,
}

impl Resets {
    pub fn at(model: &SlgssmModel, v: &[f64], jitter: &mut usize) -> Result<Self> {
        let corr = model
            .emission
            .regimes()
            .iter()
            .map(|r| {
                let c = reset_correct(r, v)?;
                *jitter += c.jittered as usize;
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { corr })
    }
}

fn initial_state(space: &ConfigSpace, resets: &Resets) -> (Vec<f64>, Vec<Option<GaussianBelief>>) {
    let mut lw = vec![f64::NEG_INFINITY; space.len()];
    let mut beliefs = vec![None; space.len()];
    for sigma in 0..space.len() {
        let li = space.log_initial[sigma];
        if li == f64::NEG_INFINITY {
            continue;
        }
        let c = &resets.corr[space.regime(sigma)];
        lw[sigma] = li + c.log_lik;
        beliefs[sigma] = Some(c.belief.clone());
    }
    (lw, beliefs)
}

/// Normalizes the weights, attaches them to the beliefs, and returns the log normalizer.
fn finish(t: usize, mut lw: Vec<f64>, mut beliefs: Vec<Option<GaussianBelief>>) -> Result<(SwitchBeliefState, f64)> {
    let z = normalize_log(&mut lw);
    if z == f64::NEG_INFINITY || z.is_nan() {
        return Err(Error::ImpossibleData { t: t + 1 });
    }
    for (b, &w) in beliefs.iter_mut().zip(&lw) {
        if w == f64::NEG_INFINITY {
            *b = None;
        } else if let Some(b) = b {
            b.log_weight = w;
        }
    }
    Ok((SwitchBeliefState { log_weights: lw, beliefs, mixtures: None }, z))
}

/// `(log weight, belief)` branches merged by moment matching.
fn merge(branches: &[(f64, &GaussianBelief)], prune: bool) -> (f64, Option<GaussianBelief>) {
    let lws: Vec<f64> = branches.iter().map(|b| b.0).collect();
    let z = log_sum_exp(&lws);
    if z == f64::NEG_INFINITY {
        return (z, None);
    }
    let keep = |w: f64| !prune || w >= PRUNE_BELOW;
    let merged = collapse(
        branches
            .iter()
            .map(|(lw, b)| ((lw - z).exp(), b))
            .filter(|(w, _)| keep(*w))
            .map(|(w, b)| (w, &b.mean, &b.cov)),
    );
    (z, merged)
}

/// Continue-branch Kalman steps from `from` into regime `s`, computed once per pair.
fn continue_cache(
    model: &SlgssmModel,
    space: &ConfigSpace,
    prev: &SwitchBeliefState,
    v: &[f64],
    jitter: &mut usize,
) -> Result<Vec<Option<Correction>>> {
    let s_n = space.n_regimes;
    let mut cache: Vec<Option<Correction>> = vec![None; space.len() * s_n];
    for from in 0..space.len() {
        let Some(b) = &prev.beliefs[from] else { continue };
        for &(to, _, link) in &space.succs[from] {
            let s = space.regime(to);
            if link == Link::Continue && cache[from * s_n + s].is_none() {
                let c = step(b, model.emission.regime(s), v)?;
                *jitter += c.jittered as usize;
                cache[from * s_n + s] = Some(c);
            }
        }
    }
    Ok(cache)
}

fn has_resets(space: &ConfigSpace) -> bool {
    space.preds.iter().flatten().any(|p| p.link == Link::Reset)
}

pub(crate) fn collapsed_filter(
    model: &SlgssmModel,
    space: ConfigSpace,
    series: &TimeSeries,
    opts: FilterOptions,
) -> Result<FilterOutput> {
    let n = series.len();
    let s_n = space.n_regimes;
    let mut jitter = 0;
    let resets = Resets::at(model, series.row(0), &mut jitter)?;
    let (lw, beliefs) = initial_state(&space, &resets);
    let (first, mut ll) = finish(0, lw, beliefs)?;
    let mut states = Vec::with_capacity(n);
    states.push(first);
    let uses_reset = has_resets(&space);
    for t in 1..n {
        let v = series.row(t);
        let prev = &states[t - 1];
        let cache = continue_cache(model, &space, prev, v, &mut jitter)?;
        let resets = if uses_reset { Some(Resets::at(model, v, &mut jitter)?) } else { None };
        let mut lw = vec![f64::NEG_INFINITY; space.len()];
        let mut beliefs = vec![None; space.len()];
        let mut branches: Vec<(f64, &GaussianBelief)> = Vec::new();
        for to in 0..space.len() {
            let s = space.regime(to);
            branches.clear();
            for p in &space.preds[to] {
                let w = prev.log_weights[p.from];
                if w == f64::NEG_INFINITY {
                    continue;
                }
                let c = match p.link {
                    Link::Continue => cache[p.from * s_n + s].as_ref(),
                    Link::Reset => resets.as_ref().map(|r| &r.corr[s]),
                };
                let c = c.ok_or_else(|| Error::Contract("missing branch".into()))?;
                branches.push((w + p.log_p + c.log_lik, &c.belief));
            }
            (lw[to], beliefs[to]) = merge(&branches, opts.prune);
        }
        let (st, z) = finish(t, lw, beliefs)?;
        ll += z;
        states.push(st);
    }
    Ok(FilterOutput { variant: model.variant, space, states, log_likelihood: ll, jitter_count: jitter })
}

/// Decreasing counts: `(s, c)` is reached from `(s, c + 1)` or from any `(s', 1)`; the latter
/// mixture does not depend on `c` beyond the factor `ρ_s(c)`.
fn factored_dc(model: &SlgssmModel, space: ConfigSpace, series: &TimeSeries, opts: FilterOptions) -> Result<FilterOutput> {
    let law = model
        .durations
        .as_ref()
        .ok_or_else(|| Error::InvalidModel("decreasing-count filter needs a duration law".into()))?;
    let tr = &model.transition;
    let n = series.len();
    let (s_n, dm) = (space.n_regimes, space.n_counts);
    let mut jitter = 0;
    let resets = Resets::at(model, series.row(0), &mut jitter)?;
    let (lw, beliefs) = initial_state(&space, &resets);
    let (first, mut ll) = finish(0, lw, beliefs)?;
    let mut states = Vec::with_capacity(n);
    states.push(first);
    for t in 1..n {
        let v = series.row(t);
        let prev = &states[t - 1];
        let cache = continue_cache(model, &space, prev, v, &mut jitter)?;
        let mut lw = vec![f64::NEG_INFINITY; space.len()];
        let mut beliefs = vec![None; space.len()];
        for s in 0..s_n {
            let mut entering: Vec<(f64, &GaussianBelief)> = Vec::new();
            for i in 0..s_n {
                let from = space.index(i, 1);
                let w = prev.log_weights[from];
                if w == f64::NEG_INFINITY || tr.p(s, i) == 0.0 {
                    continue;
                }
                let c = cache[from * s_n + s].as_ref().ok_or_else(|| Error::Contract("missing branch".into()))?;
                entering.push((w + tr.log_p(s, i) + c.log_lik, &c.belief));
            }
            let (w_in, g_in) = merge(&entering, opts.prune);
            for c in 1..=dm {
                let to = space.index(s, c);
                let mut branches: Vec<(f64, &GaussianBelief)> = Vec::with_capacity(2);
                if c < dm {
                    let from = space.index(s, c + 1);
                    let w = prev.log_weights[from];
                    if w > f64::NEG_INFINITY {
                        let k = cache[from * s_n + s].as_ref().ok_or_else(|| Error::Contract("missing branch".into()))?;
                        branches.push((w + k.log_lik, &k.belief));
                    }
                }
                let lr = law.spec(s).log_rho(c);
                if let Some(g) = &g_in {
                    if lr > f64::NEG_INFINITY {
                        branches.push((w_in + lr, g));
                    }
                }
                (lw[to], beliefs[to]) = merge(&branches, opts.prune);
            }
        }
        let (st, z) = finish(t, lw, beliefs)?;
        ll += z;
        states.push(st);
    }
    Ok(FilterOutput { variant: model.variant, space, states, log_likelihood: ll, jitter_count: jitter })
}
