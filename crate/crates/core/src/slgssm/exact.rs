//! Exact filtering for variants whose hidden state restarts at regime boundaries.
//!
//! Between resets the regime is fixed, so `p(h_t | σ_t, τ, v_{1:t})` depends only on the regime
//! and the last reset time `τ`; the filtered law per configuration is a finite mixture over `τ`.

use std::collections::{BTreeMap, HashMap};

use super::config::{ConfigSpace, Link};
use super::filter::Resets;
use super::kalman::{collapse, step, GaussianBelief};
use super::{FilterOutput, MixtureComponent, SwitchBeliefState};
use crate::error::{Error, Result};
use crate::math::{log_add_exp, log_sum_exp_iter};
use crate::model::{SlgssmModel, TimeSeries};

fn check_space(space: &ConfigSpace) -> Result<()> {
    let resets = space.preds.iter().flatten().any(|p| p.link == Link::Reset);
    if !resets {
        return Err(Error::Contract("exact mode needs a variant that resets the hidden state".into()));
    }
    for (to, ps) in space.preds.iter().enumerate() {
        for p in ps {
            if p.link == Link::Continue && space.regime(p.from) != space.regime(to) {
                return Err(Error::Contract("exact mode needs continuations to keep the regime".into()));
            }
        }
    }
    Ok(())
}

pub(crate) fn exact_filter(model: &SlgssmModel, space: ConfigSpace, series: &TimeSeries) -> Result<FilterOutput> {
    check_space(&space)?;
    let n = series.len();
    let cap = model.mixture_cap;
    let mut jitter = 0;
    // (regime, reset time) -> filtered Gaussian and its latest predictive log-likelihood
    let mut gauss: HashMap<(usize, usize), GaussianBelief> = HashMap::new();
    let mut comps: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); space.len()];
    let resets = Resets::at(model, series.row(0), &mut jitter)?;
    for sigma in 0..space.len() {
        let li = space.log_initial[sigma];
        if li == f64::NEG_INFINITY {
            continue;
        }
        let s = space.regime(sigma);
        comps[sigma].insert(0, li + resets.corr[s].log_lik);
        gauss.entry((s, 0)).or_insert_with(|| resets.corr[s].belief.clone());
    }
    let mut ll = normalize(&mut comps, 0)?;
    check_cap(&comps, cap)?;
    let mut states = vec![emit(&space, &comps, &gauss)];
    for t in 1..n {
        let v = series.row(t);
        let resets = Resets::at(model, v, &mut jitter)?;
        let mut next_gauss = HashMap::new();
        let mut cont_ll: HashMap<(usize, usize), f64> = HashMap::new();
        let mut next: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); space.len()];
        for to in 0..space.len() {
            let s = space.regime(to);
            let mut entering = f64::NEG_INFINITY;
            for p in &space.preds[to] {
                for (&tau, &w) in &comps[p.from] {
                    match p.link {
                        Link::Continue => {
                            let key = (s, tau);
                            if !cont_ll.contains_key(&key) {
                                let c = step(&gauss[&key], model.emission.regime(s), v)?;
                                jitter += c.jittered as usize;
                                cont_ll.insert(key, c.log_lik);
                                next_gauss.insert(key, c.belief);
                            }
                            let x = w + p.log_p + cont_ll[&key];
                            let e = next[to].entry(tau).or_insert(f64::NEG_INFINITY);
                            *e = log_add_exp(*e, x);
                        }
                        Link::Reset => entering = log_add_exp(entering, w + p.log_p),
                    }
                }
            }
            if entering > f64::NEG_INFINITY {
                next[to].insert(t, entering + resets.corr[s].log_lik);
                next_gauss.entry((s, t)).or_insert_with(|| resets.corr[s].belief.clone());
            }
        }
        comps = next;
        gauss = next_gauss;
        ll += normalize(&mut comps, t)?;
        check_cap(&comps, cap)?;
        states.push(emit(&space, &comps, &gauss));
    }
    Ok(FilterOutput { variant: model.variant, space, states, log_likelihood: ll, jitter_count: jitter })
}

fn normalize(comps: &mut [BTreeMap<usize, f64>], t: usize) -> Result<f64> {
    let z = log_sum_exp_iter(comps.iter().flat_map(|m| m.values().copied()));
    if z == f64::NEG_INFINITY || z.is_nan() {
        return Err(Error::ImpossibleData { t: t + 1 });
    }
    for m in comps.iter_mut() {
        m.retain(|_, w| *w > f64::NEG_INFINITY);
        for w in m.values_mut() {
            *w -= z;
        }
    }
    Ok(z)
}

fn check_cap(comps: &[BTreeMap<usize, f64>], cap: usize) -> Result<()> {
    let components: usize = comps.iter().map(BTreeMap::len).sum();
    if components > cap {
        return Err(Error::MixtureCapExceeded { components, cap });
    }
    Ok(())
}

fn emit(
    space: &ConfigSpace,
    comps: &[BTreeMap<usize, f64>],
    gauss: &HashMap<(usize, usize), GaussianBelief>,
) -> SwitchBeliefState {
    let mut log_weights = vec![f64::NEG_INFINITY; space.len()];
    let mut beliefs = vec![None; space.len()];
    let mut mixtures = vec![Vec::new(); space.len()];
    for sigma in 0..space.len() {
        let m = &comps[sigma];
        if m.is_empty() {
            continue;
        }
        let s = space.regime(sigma);
        let w = log_sum_exp_iter(m.values().copied());
        log_weights[sigma] = w;
        mixtures[sigma] = m
            .iter()
            .map(|(&tau, &lw)| MixtureComponent {
                reset_time: tau + 1,
                belief: gauss[&(s, tau)].clone().with_log_weight(lw - w),
            })
            .collect();
        beliefs[sigma] = collapse(
            mixtures[sigma].iter().map(|c| (c.belief.log_weight.exp(), &c.belief.mean, &c.belief.cov)),
        )
        .map(|b| b.with_log_weight(w));
    }
    SwitchBeliefState { log_weights, beliefs, mixtures: Some(mixtures) }
}
