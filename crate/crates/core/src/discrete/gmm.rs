//! Smoothing over `(s_t, m_t)` for mixture emissions, with and without a mixture-indicator chain.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::math::{ln, log_sum_exp};
use crate::model::{GmmEmission, TimeSeries, TransitionModel};

/// Posteriors over regime and mixture component.
#[derive(Debug, Clone)]
pub struct MixturePosteriors {
    /// `log p(s_t, m_t, v_{1:t})`, `T × S × M`.
    pub log_alpha: Array3<f64>,
    /// `log p(v_{t+1:T} | s_t, m_t)`; constant in `m` without a mixture chain.
    pub log_beta: Array3<f64>,
    /// `p(s_t, m_t | v_{1:T})`.
    pub gamma_sm: Array3<f64>,
    /// `p(s_t | v_{1:T})`.
    pub gamma: Array2<f64>,
    pub log_likelihood: f64,
}

fn finish(log_alpha: Array3<f64>, log_beta: Array3<f64>) -> MixturePosteriors {
    let (n, s, m) = log_alpha.dim();
    let mut buf = Vec::with_capacity(s * m);
    for i in 0..s {
        for c in 0..m {
            buf.push(log_alpha[[n - 1, i, c]]);
        }
    }
    let log_likelihood = log_sum_exp(&buf);
    let mut gamma_sm = Array3::zeros((n, s, m));
    let mut gamma = Array2::zeros((n, s));
    for t in 0..n {
        buf.clear();
        for i in 0..s {
            for c in 0..m {
                buf.push(log_alpha[[t, i, c]] + log_beta[[t, i, c]]);
            }
        }
        let z = log_sum_exp(&buf);
        for i in 0..s {
            for c in 0..m {
                let g = (buf[i * m + c] - z).exp();
                gamma_sm[[t, i, c]] = g;
                gamma[[t, i]] += g;
            }
        }
    }
    MixturePosteriors { log_alpha, log_beta, gamma_sm, gamma, log_likelihood }
}

fn check(tr: &TransitionModel, gmm: &GmmEmission) -> Result<()> {
    if tr.n_regimes() != gmm.n_regimes() {
        return Err(Error::Shape("transition and mixture emission disagree on S".into()));
    }
    Ok(())
}

/// `α^{s,m}_t = p(v_t|s,m) p(m|s) Σ_{s'} π_{s s'} Σ_{m'} α^{s',m'}_{t-1}` and
/// `β^s_t = Σ_{s'} β^{s'}_{t+1} Σ_{m'} p(v_{t+1}|s',m') p(m'|s') π_{s' s}`.
pub fn smooth_gmm(tr: &TransitionModel, gmm: &GmmEmission, series: &TimeSeries) -> Result<MixturePosteriors> {
    check(tr, gmm)?;
    let comp = gmm.component_table(series)?;
    let (n, s, m) = comp.dim();
    let lw: Vec<Vec<f64>> = gmm.weights().iter().map(|r| r.iter().map(|&w| ln(w)).collect()).collect();
    let mut alpha = Array3::from_elem((n, s, m), f64::NEG_INFINITY);
    for i in 0..s {
        for c in 0..m {
            alpha[[0, i, c]] = tr.log_initial()[i] + lw[i][c] + comp[[0, i, c]];
        }
    }
    let mut marg = vec![0.0; s];
    let mut buf = vec![0.0; s.max(m)];
    for t in 1..n {
        for (i, mg) in marg.iter_mut().enumerate() {
            *mg = log_sum_exp(alpha.slice(ndarray::s![t - 1, i, ..]).as_slice().unwrap());
        }
        for j in 0..s {
            for i in 0..s {
                buf[i] = tr.log_p(j, i) + marg[i];
            }
            let pred = log_sum_exp(&buf[..s]);
            for c in 0..m {
                alpha[[t, j, c]] = comp[[t, j, c]] + lw[j][c] + pred;
            }
        }
        if alpha.slice(ndarray::s![t, .., ..]).iter().all(|&a| a == f64::NEG_INFINITY) {
            return Err(Error::ImpossibleData { t: t + 1 });
        }
    }
    let mut beta2 = Array2::zeros((n, s));
    let mut emit = vec![0.0; s];
    for t in (0..n - 1).rev() {
        for (j, e) in emit.iter_mut().enumerate() {
            for c in 0..m {
                buf[c] = comp[[t + 1, j, c]] + lw[j][c];
            }
            *e = log_sum_exp(&buf[..m]) + beta2[[t + 1, j]];
        }
        for i in 0..s {
            for j in 0..s {
                buf[j] = emit[j] + tr.log_p(j, i);
            }
            beta2[[t, i]] = log_sum_exp(&buf[..s]);
        }
    }
    let log_beta = Array3::from_shape_fn((n, s, m), |(t, i, _)| beta2[[t, i]]);
    Ok(finish(alpha, log_beta))
}

/// Mixture indicators follow `p(m_t | m_{t-1}, s_t)`:
/// `α^{s,m}_t = p(v_t|s,m) Σ_{m'} p(m|m',s) Σ_{s'} π_{s s'} α^{s',m'}_{t-1}`.
pub fn smooth_gmm_chained(
    tr: &TransitionModel,
    gmm: &GmmEmission,
    series: &TimeSeries,
) -> Result<MixturePosteriors> {
    check(tr, gmm)?;
    let chain = gmm
        .chain()
        .ok_or_else(|| Error::InvalidModel("mixture emission has no mixture_transition".into()))?;
    let lc: Vec<Vec<Vec<f64>>> = chain
        .iter()
        .map(|mat| mat.iter().map(|row| row.iter().map(|&p| ln(p)).collect()).collect())
        .collect();
    let comp = gmm.component_table(series)?;
    let (n, s, m) = comp.dim();
    let lw: Vec<Vec<f64>> = gmm.weights().iter().map(|r| r.iter().map(|&w| ln(w)).collect()).collect();
    let mut alpha = Array3::from_elem((n, s, m), f64::NEG_INFINITY);
    for i in 0..s {
        for c in 0..m {
            alpha[[0, i, c]] = tr.log_initial()[i] + lw[i][c] + comp[[0, i, c]];
        }
    }
    // pre[j][m'] = Σ_{s'} π_{j s'} α^{s',m'}_{t-1}
    let mut pre = vec![vec![0.0; m]; s];
    let mut buf = vec![0.0; s.max(m)];
    for t in 1..n {
        for (j, row) in pre.iter_mut().enumerate() {
            for (c, p) in row.iter_mut().enumerate() {
                for i in 0..s {
                    buf[i] = tr.log_p(j, i) + alpha[[t - 1, i, c]];
                }
                *p = log_sum_exp(&buf[..s]);
            }
        }
        for j in 0..s {
            for c in 0..m {
                for cp in 0..m {
                    buf[cp] = lc[j][c][cp] + pre[j][cp];
                }
                alpha[[t, j, c]] = comp[[t, j, c]] + log_sum_exp(&buf[..m]);
            }
        }
        if alpha.slice(ndarray::s![t, .., ..]).iter().all(|&a| a == f64::NEG_INFINITY) {
            return Err(Error::ImpossibleData { t: t + 1 });
        }
    }
    let mut beta = Array3::zeros((n, s, m));
    // inner[j][m] = Σ_{m'} p(m'|m,j) p(v_{t+1}|j,m') β^{j,m'}_{t+1}
    let mut inner = vec![vec![0.0; m]; s];
    for t in (0..n - 1).rev() {
        for (j, row) in inner.iter_mut().enumerate() {
            for (c, x) in row.iter_mut().enumerate() {
                for cn in 0..m {
                    buf[cn] = lc[j][cn][c] + comp[[t + 1, j, cn]] + beta[[t + 1, j, cn]];
                }
                *x = log_sum_exp(&buf[..m]);
            }
        }
        for i in 0..s {
            for c in 0..m {
                for j in 0..s {
                    buf[j] = tr.log_p(j, i) + inner[j][c];
                }
                beta[[t, i, c]] = log_sum_exp(&buf[..s]);
            }
        }
    }
    Ok(finish(alpha, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::hmm::smooth_parallel;

    fn model() -> (TransitionModel, GmmEmission, TimeSeries) {
        let tr = TransitionModel::from_rows(vec![0.3, 0.7], &[vec![0.8, 0.25], vec![0.2, 0.75]]).unwrap();
        let g = GmmEmission::univariate(
            vec![vec![0.4, 0.6], vec![0.5, 0.5]],
            vec![vec![-1.0, 0.5], vec![2.0, 0.0]],
            vec![vec![1.0, 0.3], vec![0.7, 2.0]],
        )
        .unwrap();
        let v = TimeSeries::univariate(vec![0.1, -0.8, 1.9, 2.2, 0.4]).unwrap();
        (tr, g, v)
    }

    #[test]
    fn marginal_over_components_matches_collapsed_hmm() {
        let (tr, g, v) = model();
        let a = smooth_gmm(&tr, &g, &v).unwrap();
        let b = smooth_parallel(&tr, &g.log_lik_table(&v).unwrap()).unwrap();
        for (x, y) in a.gamma.iter().zip(b.gamma.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-12);
    }

    #[test]
    fn broadcast_chain_reduces_to_unchained() {
        let (tr, g, v) = model();
        let chain: Vec<Vec<Vec<f64>>> = g
            .weights()
            .iter()
            .map(|w| w.iter().map(|&p| vec![p; w.len()]).collect())
            .collect();
        let gc = g.clone().with_chain(chain).unwrap();
        let a = smooth_gmm(&tr, &g, &v).unwrap();
        let b = smooth_gmm_chained(&tr, &gc, &v).unwrap();
        for (x, y) in a.gamma_sm.iter().zip(b.gamma_sm.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_chain_locks_component() {
        let tr = TransitionModel::from_rows(vec![1.0], &[vec![1.0]]).unwrap();
        let g = GmmEmission::univariate(vec![vec![0.5, 0.5]], vec![vec![0.0, 3.0]], vec![vec![1.0, 1.0]])
            .unwrap()
            .with_chain(vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]])
            .unwrap();
        let v = TimeSeries::univariate(vec![0.0, 1.5, 1.5]).unwrap();
        let p = smooth_gmm_chained(&tr, &g, &v).unwrap();
        // Both component paths are constant; the first observation favours component 0.
        let l0: f64 = [0.0f64, 1.5, 1.5].iter().map(|x| -0.5 * x * x).sum();
        let l1: f64 = [0.0f64, 1.5, 1.5].iter().map(|x| -0.5 * (x - 3.0) * (x - 3.0)).sum();
        let w0 = 1.0 / (1.0 + (l1 - l0).exp());
        for t in 0..3 {
            assert!((p.gamma_sm[[t, 0, 0]] - w0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_regime_gives_component_responsibilities() {
        let tr = TransitionModel::from_rows(vec![1.0], &[vec![1.0]]).unwrap();
        let g = GmmEmission::univariate(vec![vec![0.3, 0.7]], vec![vec![0.0, 2.0]], vec![vec![1.0, 0.5]]).unwrap();
        let v = TimeSeries::univariate(vec![0.4, 1.7]).unwrap();
        let p = smooth_gmm(&tr, &g, &v).unwrap();
        for t in 0..2 {
            let x = v.scalar(t);
            let a = 0.3 * (crate::math::log_normal(x, 0.0, 1.0)).exp();
            let b = 0.7 * (crate::math::log_normal(x, 2.0, 0.5)).exp();
            assert!((p.gamma_sm[[t, 0, 0]] - a / (a + b)).abs() < 1e-12);
        }
    }
}
