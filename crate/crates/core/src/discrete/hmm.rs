//! Forward-backward, sequential smoothing and Viterbi over a single regime chain.
//!
//! The emission enters only through a `T × S` table of `log p(v_t | s_t, v_{t-k:t-1})`, so the same
//! routines serve the plain HMM (`k = 0`), mixture emissions and switching autoregressions.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{argmax, log_sum_exp};
use crate::model::TransitionModel;

/// Smoothing output over regimes.
#[derive(Debug, Clone)]
pub struct PosteriorTables {
    /// `log p(s_t, v_{1:t})`.
    pub log_alpha: Array2<f64>,
    /// `log p(v_{t+1:T} | s_t, v_{t-k+1:t})`.
    pub log_beta: Array2<f64>,
    /// `p(s_t | v_{1:T})`.
    pub gamma: Array2<f64>,
    pub log_likelihood: f64,
}

/// Most likely regime path.
#[derive(Debug, Clone)]
pub struct ViterbiResult {
    pub path: Vec<usize>,
    pub log_joint: f64,
    /// `backpointers[[t, s]]` is the best predecessor of `s` at `t` (row 0 unused).
    pub backpointers: Array2<usize>,
}

pub(crate) fn check_table(tr: &TransitionModel, loglik: &Array2<f64>) -> Result<()> {
    if loglik.nrows() == 0 {
        return Err(Error::InvalidInput("empty series".into()));
    }
    if loglik.ncols() != tr.n_regimes() {
        return Err(Error::Shape(format!(
            "likelihood table has {} regimes, transition has {}",
            loglik.ncols(),
            tr.n_regimes()
        )));
    }
    if let Some(((t, s), _)) = loglik.indexed_iter().find(|(_, v)| v.is_nan()) {
        return Err(Error::Numerical(format!("NaN emission likelihood at t={}, regime {s}", t + 1)));
    }
    Ok(())
}

/// Log-domain forward pass: `α_t(s) = p(v_t|s,·) Σ_{s'} π_{s s'} α_{t-1}(s')`.
pub fn forward(tr: &TransitionModel, loglik: &Array2<f64>) -> Result<Array2<f64>> {
    check_table(tr, loglik)?;
    let (n, s) = loglik.dim();
    let mut alpha = Array2::from_elem((n, s), f64::NEG_INFINITY);
    for j in 0..s {
        alpha[[0, j]] = tr.log_initial()[j] + loglik[[0, j]];
    }
    let mut buf = vec![0.0; s];
    for t in 1..n {
        for j in 0..s {
            for i in 0..s {
                buf[i] = tr.log_p(j, i) + alpha[[t - 1, i]];
            }
            alpha[[t, j]] = loglik[[t, j]] + log_sum_exp(&buf);
        }
        if alpha.row(t).iter().all(|&a| a == f64::NEG_INFINITY) {
            return Err(Error::ImpossibleData { t: t + 1 });
        }
    }
    if alpha.row(0).iter().all(|&a| a == f64::NEG_INFINITY) {
        return Err(Error::ImpossibleData { t: 1 });
    }
    Ok(alpha)
}

/// Log-domain backward pass: `β_t(s) = Σ_{s'} β_{t+1}(s') p(v_{t+1}|s',·) π_{s' s}`, `β_T = 1`.
pub fn backward(tr: &TransitionModel, loglik: &Array2<f64>) -> Result<Array2<f64>> {
    check_table(tr, loglik)?;
    let (n, s) = loglik.dim();
    let mut beta = Array2::zeros((n, s));
    let mut buf = vec![0.0; s];
    for t in (0..n - 1).rev() {
        for i in 0..s {
            for j in 0..s {
                buf[j] = beta[[t + 1, j]] + loglik[[t + 1, j]] + tr.log_p(j, i);
            }
            beta[[t, i]] = log_sum_exp(&buf);
        }
    }
    Ok(beta)
}

pub(crate) fn gamma_from(log_alpha: &Array2<f64>, log_beta: &Array2<f64>) -> (Array2<f64>, f64) {
    let n = log_alpha.nrows();
    let ll = log_sum_exp(log_alpha.row(n - 1).as_slice().unwrap());
    let mut gamma = log_alpha + log_beta;
    for mut row in gamma.outer_iter_mut() {
        let z = log_sum_exp(row.as_slice().unwrap());
        row.mapv_inplace(|x| (x - z).exp());
    }
    (gamma, ll)
}

/// Parallel (forward-backward) smoothing in the log domain.
pub fn smooth_parallel(tr: &TransitionModel, loglik: &Array2<f64>) -> Result<PosteriorTables> {
    let log_alpha = forward(tr, loglik)?;
    let log_beta = backward(tr, loglik)?;
    let (gamma, log_likelihood) = gamma_from(&log_alpha, &log_beta);
    Ok(PosteriorTables { log_alpha, log_beta, gamma, log_likelihood })
}

/// Filtered `p(s_t | v_{1:t})` in the linear domain with per-step normalisers.
///
/// Returns the filtered table and `log p(v_t | v_{1:t-1})` per step.
pub fn filter(tr: &TransitionModel, loglik: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    check_table(tr, loglik)?;
    let (n, s) = loglik.dim();
    let mut filt = Array2::zeros((n, s));
    let mut log_norm = Array1::zeros(n);
    let mut pred = tr.initial().to_vec();
    for t in 0..n {
        let row = loglik.row(t);
        let shift = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return Err(Error::ImpossibleData { t: t + 1 });
        }
        let mut z = 0.0;
        for j in 0..s {
            let v = (row[j] - shift).exp() * pred[j];
            filt[[t, j]] = v;
            z += v;
        }
        if z <= 0.0 {
            return Err(Error::ImpossibleData { t: t + 1 });
        }
        filt.row_mut(t).mapv_inplace(|v| v / z);
        log_norm[t] = z.ln() + shift;
        if t + 1 < n {
            for (j, p) in pred.iter_mut().enumerate() {
                *p = (0..s).map(|i| tr.p(j, i) * filt[[t, i]]).sum();
            }
        }
    }
    Ok((filt, log_norm))
}

/// Sequential smoothing: filter forward, then correct backwards with
/// `γ_t(s) = Σ_{s'} π_{s' s} α_t(s) / (Σ_{s̃} π_{s' s̃} α_t(s̃)) γ_{t+1}(s')`.
pub fn smooth_sequential(tr: &TransitionModel, loglik: &Array2<f64>) -> Result<PosteriorTables> {
    let (filt, log_norm) = filter(tr, loglik)?;
    let (n, s) = filt.dim();
    let mut gamma = Array2::zeros((n, s));
    gamma.row_mut(n - 1).assign(&filt.row(n - 1));
    let mut denom = vec![0.0; s];
    for t in (0..n - 1).rev() {
        for (j, d) in denom.iter_mut().enumerate() {
            *d = (0..s).map(|i| tr.p(j, i) * filt[[t, i]]).sum();
        }
        for i in 0..s {
            let mut g = 0.0;
            for j in 0..s {
                if gamma[[t + 1, j]] > 0.0 && denom[j] > 0.0 {
                    g += tr.p(j, i) * filt[[t, i]] / denom[j] * gamma[[t + 1, j]];
                }
            }
            gamma[[t, i]] = g;
        }
    }
    let mut cum = 0.0;
    let mut log_alpha = filt.mapv(f64::ln);
    for (t, mut row) in log_alpha.outer_iter_mut().enumerate() {
        cum += log_norm[t];
        row += cum;
    }
    let log_likelihood = cum;
    let log_beta = Array2::from_shape_fn((n, s), |(t, i)| {
        gamma[[t, i]].ln() - log_alpha[[t, i]] + log_likelihood
    });
    Ok(PosteriorTables { log_alpha, log_beta, gamma, log_likelihood })
}

/// Max-product recursion; ties resolve to the lowest regime index.
pub fn viterbi(tr: &TransitionModel, loglik: &Array2<f64>) -> Result<ViterbiResult> {
    check_table(tr, loglik)?;
    let (n, s) = loglik.dim();
    let mut delta = Array2::from_elem((n, s), f64::NEG_INFINITY);
    let mut psi = Array2::zeros((n, s));
    for j in 0..s {
        delta[[0, j]] = tr.log_initial()[j] + loglik[[0, j]];
    }
    let mut buf = vec![0.0; s];
    for t in 1..n {
        for j in 0..s {
            for i in 0..s {
                buf[i] = tr.log_p(j, i) + delta[[t - 1, i]];
            }
            let best = argmax(&buf);
            psi[[t, j]] = best;
            delta[[t, j]] = loglik[[t, j]] + buf[best];
        }
    }
    let last = delta.row(n - 1).to_vec();
    let end = argmax(&last);
    if last[end] == f64::NEG_INFINITY {
        return Err(Error::NoValidPath("every regime path has zero probability".into()));
    }
    let mut path = vec![0; n];
    path[n - 1] = end;
    for t in (1..n).rev() {
        path[t - 1] = psi[[t, path[t]]];
    }
    Ok(ViterbiResult { path, log_joint: last[end], backpointers: psi })
}

/// `log p(s_{1:T}, v_{1:T})` for an explicit regime path.
pub fn path_log_joint(tr: &TransitionModel, loglik: &Array2<f64>, path: &[usize]) -> f64 {
    let mut lj = tr.log_initial()[path[0]] + loglik[[0, path[0]]];
    for t in 1..path.len() {
        lj += tr.log_p(path[t], path[t - 1]) + loglik[[t, path[t]]];
    }
    lj
}

/// Forward-filtering backward-sampling of one regime path.
pub fn sample_path<R: Rng + ?Sized>(
    tr: &TransitionModel,
    loglik: &Array2<f64>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let (filt, _) = filter(tr, loglik)?;
    let (n, s) = filt.dim();
    let mut path = vec![0; n];
    path[n - 1] = draw(filt.row(n - 1).iter().copied(), rng);
    for t in (0..n - 1).rev() {
        let next = path[t + 1];
        let w: Vec<f64> = (0..s).map(|i| filt[[t, i]] * tr.p(next, i)).collect();
        path[t] = draw(w.into_iter(), rng);
    }
    Ok(path)
}

/// Categorical draw from unnormalised non-negative weights.
pub(crate) fn draw<R: Rng + ?Sized, I: Iterator<Item = f64> + Clone>(w: I, rng: &mut R) -> usize {
    let total: f64 = w.clone().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, x) in w.enumerate() {
        if x > 0.0 {
            last = i;
            acc += x;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// MAP regime per step from a posterior table.
pub fn posterior_mode(gamma: &Array2<f64>) -> Vec<usize> {
    gamma.axis_iter(Axis(0)).map(|r| argmax(r.as_slice().unwrap())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_state() -> TransitionModel {
        TransitionModel::from_rows(vec![0.6, 0.4], &[vec![0.7, 0.2], vec![0.3, 0.8]]).unwrap()
    }

    #[test]
    fn single_step_posterior_is_prior_times_likelihood() {
        let tr = two_state();
        let ll = array![[0.1f64.ln(), 0.5f64.ln()]];
        let p = smooth_parallel(&tr, &ll).unwrap();
        let a = 0.6 * 0.1;
        let b = 0.4 * 0.5;
        assert!((p.gamma[[0, 0]] - a / (a + b)).abs() < 1e-15);
        let v = viterbi(&tr, &ll).unwrap();
        assert_eq!(v.path, vec![1]);
    }

    #[test]
    fn symmetric_model_gives_flat_posterior() {
        let tr = TransitionModel::from_rows(vec![0.5, 0.5], &[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let ll = Array2::from_shape_fn((6, 2), |(t, _)| -(t as f64) * 0.3);
        let p = smooth_parallel(&tr, &ll).unwrap();
        for g in p.gamma.iter() {
            assert!((g - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn viterbi_ties_choose_lowest_index() {
        let tr = TransitionModel::from_rows(vec![0.5, 0.5], &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let ll = Array2::zeros((4, 2));
        let v = viterbi(&tr, &ll).unwrap();
        assert_eq!(v.path, vec![0, 0, 0, 0]);
    }

    #[test]
    fn permutation_chain_tracks_orbit() {
        let tr = TransitionModel::from_rows(vec![0.5, 0.5], &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let ll = array![[0.0, (0.5f64).ln()], [0.0, 0.0], [0.0, 0.0]];
        let p = smooth_sequential(&tr, &ll).unwrap();
        let q = smooth_parallel(&tr, &ll).unwrap();
        let w0 = 1.0 / 1.5;
        let expect = [[w0, 1.0 - w0], [1.0 - w0, w0], [w0, 1.0 - w0]];
        for t in 0..3 {
            for s in 0..2 {
                assert!((p.gamma[[t, s]] - expect[t][s]).abs() < 1e-14);
                assert!((q.gamma[[t, s]] - expect[t][s]).abs() < 1e-14);
            }
        }
        assert!((p.log_likelihood - q.log_likelihood).abs() < 1e-14);
    }
}
