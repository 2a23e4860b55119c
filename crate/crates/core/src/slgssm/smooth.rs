//! Backward pass over collapsed filtered beliefs.

use nalgebra::{DMatrix, DVector};

use super::config::Link;
use super::kalman::{backward_moments, collapse, log_gaussian, predict, reverse_dynamics, GaussianBelief};
use super::{FilterOutput, SwitchBeliefState};
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, normalize_log};
use crate::model::{SlgssmModel, SlgssmVariant};

/// `p(σ_t, h_t | v_{1:T})` as one Gaussian per configuration.
///
/// The continuous part conditions `h_t` on `h_{t+1} | σ_{t+1}, v_{1:T}` alone. Discrete backward
/// weights use `p(h_{t+1} | σ_t, σ_{t+1}, v_{1:t})` evaluated at the smoothed mean of `h_{t+1}`.
/// With increasing counts and resets both steps are exact.
pub fn slgssm_smooth(filtered: &FilterOutput, model: &SlgssmModel) -> Result<Vec<SwitchBeliefState>> {
    if filtered.variant != model.variant {
        return Err(Error::Contract(format!(
            "filter ran the {:?} variant, smoother asked for {:?}",
            filtered.variant, model.variant
        )));
    }
    if model.variant == SlgssmVariant::DcReset {
        return Err(Error::Contract("no smoother for decreasing counts with resets".into()));
    }
    let space = &filtered.space;
    let n = filtered.states.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let k = space.len();
    let mut out: Vec<SwitchBeliefState> = Vec::with_capacity(n);
    let mut last = filtered.states[n - 1].clone();
    last.mixtures = None;
    out.push(last);
    for t in (0..n - 1).rev() {
        let filt = &filtered.states[t];
        let next = out.last().expect("pushed above");
        // per σ_t: (log joint weight with σ_{t+1}, mean, cov)
        let mut parts: Vec<Vec<(f64, DVector<f64>, DMatrix<f64>)>> = vec![Vec::new(); k];
        for to in 0..k {
            let w_next = next.log_weights[to];
            let Some(sm) = next.beliefs[to].as_ref() else { continue };
            if w_next == f64::NEG_INFINITY {
                continue;
            }
            let regime = model.emission.regime(space.regime(to));
            let preds: Vec<_> = space.preds[to]
                .iter()
                .filter(|p| filt.log_weights[p.from] > f64::NEG_INFINITY && filt.beliefs[p.from].is_some())
                .collect();
            if preds.is_empty() {
                return Err(Error::Numerical(format!("smoothed mass on an unreachable configuration at t={}", t + 2)));
            }
            let all_reset = preds.iter().all(|p| p.link == Link::Reset);
            let mut lq = Vec::with_capacity(preds.len());
            for p in &preds {
                let f = filt.beliefs[p.from].as_ref().expect("filtered above");
                let dens = match p.link {
                    Link::Continue => {
                        let (m, c) = predict(f, regime);
                        log_gaussian(&sm.mean, &m, &c)?
                    }
                    Link::Reset if all_reset => 0.0,
                    Link::Reset => log_gaussian(&sm.mean, &regime.reset_mean, &regime.reset_cov)?,
                };
                lq.push(filt.log_weights[p.from] + p.log_p + dens);
            }
            normalize_log(&mut lq);
            for (p, q) in preds.iter().zip(&lq) {
                if *q == f64::NEG_INFINITY {
                    continue;
                }
                let f = filt.beliefs[p.from].as_ref().expect("filtered above");
                let b = match p.link {
                    Link::Continue => backward_moments(&reverse_dynamics(f, regime)?, sm),
                    Link::Reset => f.clone(),
                };
                parts[p.from].push((q + w_next, b.mean, b.cov));
            }
        }
        let mut lw: Vec<f64> = parts.iter().map(|ps| log_sum_exp(&ps.iter().map(|x| x.0).collect::<Vec<_>>())).collect();
        let beliefs: Vec<Option<GaussianBelief>> = parts
            .iter()
            .zip(&lw)
            .map(|(ps, &w)| {
                if w == f64::NEG_INFINITY {
                    None
                } else {
                    collapse(ps.iter().map(|(x, m, c)| ((x - w).exp(), m, c)))
                }
            })
            .collect();
        let z = normalize_log(&mut lw);
        if z == f64::NEG_INFINITY || z.is_nan() {
            return Err(Error::Numerical(format!("smoothed weights vanish at t={}", t + 1)));
        }
        let beliefs = beliefs
            .into_iter()
            .zip(&lw)
            .map(|(b, &w)| b.filter(|_| w > f64::NEG_INFINITY).map(|b| b.with_log_weight(w)))
            .collect();
        out.push(SwitchBeliefState { log_weights: lw, beliefs, mixtures: None });
    }
    out.reverse();
    Ok(out)
}
