//! Decreasing duration-count model: `c_t` counts the steps left in the current regime.
//!
//! `(s_t, c_t)` follows `(s, c+1) → (s, c)` with probability one, and `(s', 1) → (s, c)` with
//! probability `π_{s s'} ρ_c`.

use ndarray::{Array2, Array3};

use super::{check_inputs, finish_tables, CountIndexedTables, CountPath};
use crate::error::{Error, Result};
use crate::math::{log_add_exp, log_sum_exp};
use crate::model::{Boundary, DurationLaw, TransitionModel};

fn log_init(tr: &TransitionModel, law: &DurationLaw, boundary: Boundary, s: usize, c: usize) -> f64 {
    tr.log_initial()[s]
        + match boundary {
            Boundary::Relaxed => law.log_relaxed_start(s, c),
            Boundary::Strict => law.spec(s).log_rho(c),
        }
}

/// Pruned forward pass in `O(T S (S + d_max))`.
pub fn dc_forward(
    tr: &TransitionModel,
    law: &DurationLaw,
    boundary: Boundary,
    loglik: &Array2<f64>,
) -> Result<Array3<f64>> {
    check_inputs(tr, law, boundary, loglik)?;
    let (n, s) = loglik.dim();
    let dm = law.d_max();
    let mut alpha = Array3::from_elem((n, s, dm), f64::NEG_INFINITY);
    for r in 0..s {
        for c in 1..=dm {
            alpha[[0, r, c - 1]] = loglik[[0, r]] + log_init(tr, law, boundary, r, c);
        }
    }
    let mut switch_in = vec![0.0; s];
    let mut buf = vec![0.0; s];
    for t in 1..n {
        for (j, sw) in switch_in.iter_mut().enumerate() {
            for i in 0..s {
                buf[i] = tr.log_p(j, i) + alpha[[t - 1, i, 0]];
            }
            *sw = log_sum_exp(&buf);
        }
        for j in 0..s {
            let spec = law.spec(j);
            for c in 1..=dm {
                let stay = if c < dm { alpha[[t - 1, j, c]] } else { f64::NEG_INFINITY };
                let enter = spec.log_rho(c) + switch_in[j];
                alpha[[t, j, c - 1]] = loglik[[t, j]] + log_add_exp(stay, enter);
            }
        }
        if alpha.slice(ndarray::s![t, .., ..]).iter().all(|&a| a == f64::NEG_INFINITY) {
            return Err(Error::ImpossibleData { t: t + 1 });
        }
    }
    Ok(alpha)
}

/// Unpruned forward pass over the full `(S d_max)²` transition tensor.
pub fn dc_forward_naive(
    tr: &TransitionModel,
    law: &DurationLaw,
    boundary: Boundary,
    loglik: &Array2<f64>,
) -> Result<Array3<f64>> {
    check_inputs(tr, law, boundary, loglik)?;
    let (n, s) = loglik.dim();
    let dm = law.d_max();
    let log_trans = |to_s: usize, to_c: usize, from_s: usize, from_c: usize| -> f64 {
        let mut p = f64::NEG_INFINITY;
        if from_c > 1 && to_s == from_s && to_c + 1 == from_c {
            p = 0.0;
        }
        if from_c == 1 {
            p = log_add_exp(p, tr.log_p(to_s, from_s) + law.spec(to_s).log_rho(to_c));
        }
        p
    };
    let mut alpha = Array3::from_elem((n, s, dm), f64::NEG_INFINITY);
    for r in 0..s {
        for c in 1..=dm {
            alpha[[0, r, c - 1]] = loglik[[0, r]] + log_init(tr, law, boundary, r, c);
        }
    }
    let mut buf = Vec::with_capacity(s * dm);
    for t in 1..n {
        for j in 0..s {
            for c in 1..=dm {
                buf.clear();
                for i in 0..s {
                    for cp in 1..=dm {
                        buf.push(log_trans(j, c, i, cp) + alpha[[t - 1, i, cp - 1]]);
                    }
                }
                alpha[[t, j, c - 1]] = loglik[[t, j]] + log_sum_exp(&buf);
            }
        }
    }
    Ok(alpha)
}

/// Pruned backward pass in `O(T S d_max)` after precomputing the switch-in sum.
pub fn dc_backward(tr: &TransitionModel, law: &DurationLaw, loglik: &Array2<f64>) -> Array3<f64> {
    let (n, s) = loglik.dim();
    let dm = law.d_max();
    let mut beta = Array3::zeros((n, s, dm));
    let mut entry = vec![0.0; s];
    let mut buf = vec![0.0; dm.max(s)];
    for t in (0..n - 1).rev() {
        // entry[s'] = p(v_{t+1}|s') Σ_{c'} ρ_{c'} β_{t+1}(s', c')
        for (j, e) in entry.iter_mut().enumerate() {
            let spec = law.spec(j);
            for c in 1..=dm {
                buf[c - 1] = spec.log_rho(c) + beta[[t + 1, j, c - 1]];
            }
            *e = loglik[[t + 1, j]] + log_sum_exp(&buf[..dm]);
        }
        for i in 0..s {
            for j in 0..s {
                buf[j] = tr.log_p(j, i) + entry[j];
            }
            beta[[t, i, 0]] = log_sum_exp(&buf[..s]);
            for c in 2..=dm {
                beta[[t, i, c - 1]] = loglik[[t + 1, i]] + beta[[t + 1, i, c - 2]];
            }
        }
    }
    beta
}

/// Smoothed `p(s_t, c_t | v_{1:T})` for the decreasing-count model.
pub fn dc_smooth_table(
    tr: &TransitionModel,
    law: &DurationLaw,
    boundary: Boundary,
    loglik: &Array2<f64>,
) -> Result<CountIndexedTables> {
    let log_alpha = dc_forward(tr, law, boundary, loglik)?;
    let log_beta = dc_backward(tr, law, loglik);
    Ok(finish_tables(log_alpha, log_beta))
}

/// Max-product over `(s_t, c_t)`. Continuation wins ties against switching; among switch-in
/// predecessors the lowest regime index wins; the final argmax takes the lowest `(s, c)`.
pub fn dc_viterbi_table(
    tr: &TransitionModel,
    law: &DurationLaw,
    boundary: Boundary,
    loglik: &Array2<f64>,
) -> Result<CountPath> {
    check_inputs(tr, law, boundary, loglik)?;
    let (n, s) = loglik.dim();
    let dm = law.d_max();
    let mut delta = Array3::from_elem((n, s, dm), f64::NEG_INFINITY);
    // Predecessor regime, or usize::MAX for "same regime, count + 1".
    let mut psi = Array3::from_elem((n, s, dm), 0usize);
    for r in 0..s {
        for c in 1..=dm {
            delta[[0, r, c - 1]] = loglik[[0, r]] + log_init(tr, law, boundary, r, c);
        }
    }
    let mut best_in = vec![(0usize, 0.0); s];
    for t in 1..n {
        for (j, b) in best_in.iter_mut().enumerate() {
            let mut arg = 0;
            let mut val = f64::NEG_INFINITY;
            for i in 0..s {
                let v = tr.log_p(j, i) + delta[[t - 1, i, 0]];
                if v > val {
                    val = v;
                    arg = i;
                }
            }
            *b = (arg, val);
        }
        for j in 0..s {
            let spec = law.spec(j);
            for c in 1..=dm {
                let stay = if c < dm { delta[[t - 1, j, c]] } else { f64::NEG_INFINITY };
                let enter = spec.log_rho(c) + best_in[j].1;
                if stay >= enter && stay > f64::NEG_INFINITY {
                    delta[[t, j, c - 1]] = loglik[[t, j]] + stay;
                    psi[[t, j, c - 1]] = usize::MAX;
                } else {
                    delta[[t, j, c - 1]] = loglik[[t, j]] + enter;
                    psi[[t, j, c - 1]] = best_in[j].0;
                }
            }
        }
    }
    let mut best = (0, 0, f64::NEG_INFINITY);
    for r in 0..s {
        for c in 0..dm {
            if delta[[n - 1, r, c]] > best.2 {
                best = (r, c, delta[[n - 1, r, c]]);
            }
        }
    }
    if best.2 == f64::NEG_INFINITY {
        return Err(Error::NoValidPath("every (regime, count) path has zero probability".into()));
    }
    let mut regimes = vec![0; n];
    let mut counts = vec![0; n];
    regimes[n - 1] = best.0;
    counts[n - 1] = best.1 + 1;
    for t in (1..n).rev() {
        let p = psi[[t, regimes[t], counts[t] - 1]];
        if p == usize::MAX {
            regimes[t - 1] = regimes[t];
            counts[t - 1] = counts[t] + 1;
        } else {
            regimes[t - 1] = p;
            counts[t - 1] = 1;
        }
    }
    Ok(CountPath { regimes, counts, log_joint: best.2 })
}

/// `log p(s_{1:T}, c_{1:T}, v_{1:T})` for a decreasing-count path.
pub fn dc_path_log_joint(
    tr: &TransitionModel,
    law: &DurationLaw,
    boundary: Boundary,
    loglik: &Array2<f64>,
    path: &CountPath,
) -> f64 {
    let (s, c) = (&path.regimes, &path.counts);
    let mut lj = log_init(tr, law, boundary, s[0], c[0]) + loglik[[0, s[0]]];
    for t in 1..s.len() {
        lj += if c[t - 1] > 1 {
            if s[t] == s[t - 1] && c[t] + 1 == c[t - 1] { 0.0 } else { f64::NEG_INFINITY }
        } else {
            tr.log_p(s[t], s[t - 1]) + law.spec(s[t]).log_rho(c[t])
        };
        lj += loglik[[t, s[t]]];
    }
    lj
}
