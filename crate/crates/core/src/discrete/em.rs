//! Expectation-maximisation for mixture-emission HMMs and switching autoregressions.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};

use crate::discrete::hmm::{smooth_parallel, PosteriorTables};
use crate::error::{Error, Result};
use crate::math::ln;
use crate::model::{ArEmission, ArStart, Emission, GmmEmission, HmmModel, TimeSeries, TransitionModel};

/// Minimum total responsibility a regime (or component) must receive.
pub const STARVATION_MASS: f64 = 1e-12;
/// Ridge added to every re-estimated covariance.
pub const COVARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct EmConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub learn_initial: bool,
    pub learn_transition: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-6, learn_initial: true, learn_transition: true }
    }
}

#[derive(Debug, Clone)]
pub struct EmResult<M> {
    pub model: M,
    /// Log-likelihood of each visited parameter set, starting with the initial one.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Expected transition counts `Σ_t p(s_{t-1}=i, s_t=j | v)` stored at `[j, i]`.
pub fn transition_counts(tr: &TransitionModel, loglik: &Array2<f64>, post: &PosteriorTables) -> Array2<f64> {
    let (n, s) = loglik.dim();
    let mut xi = Array2::zeros((s, s));
    for t in 1..n {
        for i in 0..s {
            let a = post.log_alpha[[t - 1, i]];
            if a == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..s {
                let lp = a + tr.log_p(j, i) + loglik[[t, j]] + post.log_beta[[t, j]] - post.log_likelihood;
                xi[[j, i]] += lp.exp();
            }
        }
    }
    xi
}

/// Column-normalises expected transition counts; columns without mass keep their old values.
pub fn transition_m_step(
    old: &TransitionModel,
    initial: Option<Vec<f64>>,
    counts: Option<&Array2<f64>>,
) -> Result<TransitionModel> {
    let s = old.n_regimes();
    let mut switch = old.switch().clone();
    if let Some(xi) = counts {
        for i in 0..s {
            let tot: f64 = xi.column(i).sum();
            if tot > STARVATION_MASS {
                for j in 0..s {
                    switch[[j, i]] = xi[[j, i]] / tot;
                }
            }
        }
    }
    let init = match initial {
        Some(v) => {
            let tot: f64 = v.iter().sum();
            v.iter().map(|x| x / tot).collect()
        }
        None => old.initial().to_vec(),
    };
    TransitionModel::new(init, switch)
}

fn starvation(gamma: &Array2<f64>) -> Result<()> {
    for s in 0..gamma.ncols() {
        let mass: f64 = gamma.column(s).sum();
        if mass < STARVATION_MASS {
            return Err(Error::RegimeStarvation { regime: s, component: None, mass });
        }
    }
    Ok(())
}

/// Weighted least squares for AR coefficients and noise variance per regime.
///
/// Steps before the AR order enter only when the start law regresses on truncated context.
pub fn ar_m_step(ar: &ArEmission, series: &TimeSeries, gamma: &Array2<f64>) -> Result<ArEmission> {
    series.require_univariate()?;
    starvation(gamma)?;
    let k = ar.order();
    let (n, s) = gamma.dim();
    let mut w = Array3::zeros((n, s, k + 1));
    for t in 0..n {
        let lags = if t >= k {
            Some(k)
        } else if ar.start() == ArStart::Truncated {
            Some(t)
        } else {
            None
        };
        if let Some(l) = lags {
            for r in 0..s {
                w[[t, r, l]] = gamma[[t, r]];
            }
        }
    }
    ar_m_step_by_context(ar, series, &w)
}

/// Weighted least squares where `weights[[t, s, l]]` is the responsibility of regime `s` at `t`
/// with an `l`-lag context; lags beyond `l` are treated as zero regressors.
pub fn ar_m_step_by_context(ar: &ArEmission, series: &TimeSeries, weights: &Array3<f64>) -> Result<ArEmission> {
    series.require_univariate()?;
    let k = ar.order();
    let (n, n_regimes, _) = weights.dim();
    let mut coeffs = Vec::with_capacity(n_regimes);
    let mut vars = Vec::with_capacity(n_regimes);
    for s in 0..n_regimes {
        let mut xtx = DMatrix::<f64>::zeros(k, k);
        let mut xty = DVector::<f64>::zeros(k);
        let mut w_tot = 0.0;
        let lagged = |t: usize, i: usize, l: usize| if i <= l { series.scalar(t - i) } else { 0.0 };
        for t in 0..n {
            for l in 0..=k.min(t) {
                let w = weights[[t, s, l]];
                if w == 0.0 {
                    continue;
                }
                w_tot += w;
                let y = series.scalar(t);
                for a in 0..l {
                    let xa = lagged(t, a + 1, l);
                    xty[a] += w * xa * y;
                    for b in 0..l {
                        xtx[(a, b)] += w * xa * lagged(t, b + 1, l);
                    }
                }
            }
        }
        if w_tot < STARVATION_MASS {
            return Err(Error::RegimeStarvation { regime: s, component: None, mass: w_tot });
        }
        // Coefficients that never see data keep their previous values.
        let mut a = DVector::from_column_slice(&ar.coeffs()[s]);
        let active: Vec<usize> = (0..k).filter(|&i| xtx[(i, i)] > 0.0).collect();
        if !active.is_empty() {
            let sub_xtx = DMatrix::from_fn(active.len(), active.len(), |i, j| xtx[(active[i], active[j])]);
            let sub_xty = DVector::from_fn(active.len(), |i, _| xty[active[i]]);
            let sol = solve_normal(&sub_xtx, &sub_xty)?;
            for (i, &idx) in active.iter().enumerate() {
                a[idx] = sol[i];
            }
        }
        let mut sse = 0.0;
        for t in 0..n {
            for l in 0..=k.min(t) {
                let w = weights[[t, s, l]];
                if w == 0.0 {
                    continue;
                }
                let pred: f64 = (0..l).map(|i| a[i] * lagged(t, i + 1, l)).sum();
                let r = series.scalar(t) - pred;
                sse += w * r * r;
            }
        }
        coeffs.push(a.iter().copied().collect());
        vars.push(sse / w_tot + COVARIANCE_FLOOR);
    }
    ArEmission::new(coeffs, vars, ar.start())
}

fn solve_normal(xtx: &DMatrix<f64>, xty: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = xtx.clone().cholesky() {
        return Ok(ch.solve(xty));
    }
    xtx.clone()
        .pseudo_inverse(1e-12)
        .map(|p| p * xty)
        .map_err(|e| Error::Numerical(format!("AR normal equations: {e}")))
}

/// Mixture M-step from `p(s_t, m_t | v)`; a component without mass is a starvation error.
pub fn gmm_m_step(gmm: &GmmEmission, series: &TimeSeries, gamma_sm: &Array3<f64>) -> Result<GmmEmission> {
    let (n, s, m) = gamma_sm.dim();
    let d = series.dim();
    let mut weights = vec![vec![0.0; m]; s];
    let mut means = vec![Vec::with_capacity(m); s];
    let mut covs = vec![Vec::with_capacity(m); s];
    for r in 0..s {
        let regime_mass: f64 = (0..n).map(|t| (0..m).map(|c| gamma_sm[[t, r, c]]).sum::<f64>()).sum();
        if regime_mass < STARVATION_MASS {
            return Err(Error::RegimeStarvation { regime: r, component: None, mass: regime_mass });
        }
        for c in 0..m {
            let mass: f64 = (0..n).map(|t| gamma_sm[[t, r, c]]).sum();
            if mass < STARVATION_MASS {
                return Err(Error::RegimeStarvation { regime: r, component: Some(c), mass });
            }
            weights[r][c] = mass / regime_mass;
            let mut mu = DVector::<f64>::zeros(d);
            for t in 0..n {
                mu += DVector::from_row_slice(series.row(t)) * gamma_sm[[t, r, c]];
            }
            mu /= mass;
            let mut cov = DMatrix::<f64>::zeros(d, d);
            for t in 0..n {
                let diff = DVector::from_row_slice(series.row(t)) - &mu;
                cov += &diff * diff.transpose() * gamma_sm[[t, r, c]];
            }
            cov /= mass;
            cov = (&cov + cov.transpose()) * 0.5 + DMatrix::identity(d, d) * COVARIANCE_FLOOR;
            means[r].push(mu);
            covs[r].push(cov);
        }
    }
    let out = GmmEmission::new(weights, means, covs)?;
    match gmm.chain() {
        Some(ch) => out.with_chain(ch.clone()),
        None => Ok(out),
    }
}

/// `p(s_t, m_t | v)` from regime posteriors and within-regime component responsibilities.
pub fn mixture_responsibilities(
    gmm: &GmmEmission,
    series: &TimeSeries,
    gamma: &Array2<f64>,
    loglik: &Array2<f64>,
) -> Result<Array3<f64>> {
    let comp = gmm.component_table(series)?;
    let (n, s, m) = comp.dim();
    Ok(Array3::from_shape_fn((n, s, m), |(t, r, c)| {
        if gamma[[t, r]] == 0.0 {
            0.0
        } else {
            gamma[[t, r]] * (ln(gmm.weights()[r][c]) + comp[[t, r, c]] - loglik[[t, r]]).exp()
        }
    }))
}

/// EM for an [`HmmModel`] with GMM or AR emission. Mixture chains are kept fixed.
pub fn em_fit(init: &HmmModel, series: &TimeSeries, cfg: &EmConfig) -> Result<EmResult<HmmModel>> {
    if series.len() <= init.emission.order() {
        return Err(Error::InvalidInput(format!(
            "series of length {} is too short for AR order {}",
            series.len(),
            init.emission.order()
        )));
    }
    if let Emission::Gmm(g) = &init.emission {
        if g.chain().is_some() {
            return Err(Error::InvalidInput("EM does not re-estimate mixture chains".into()));
        }
    }
    let mut model = init.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    loop {
        let loglik = model.emission.log_lik_table(series)?;
        let post = smooth_parallel(&model.transition, &loglik)?;
        trace.push(post.log_likelihood);
        let it = trace.len() - 1;
        if it > 0 && (trace[it] - trace[it - 1]).abs() < cfg.tol {
            converged = true;
            break;
        }
        if it == cfg.max_iter {
            break;
        }
        starvation(&post.gamma)?;
        let emission = match &model.emission {
            Emission::Ar(ar) => Emission::Ar(ar_m_step(ar, series, &post.gamma)?),
            Emission::Gmm(g) => {
                let gsm = mixture_responsibilities(g, series, &post.gamma, &loglik)?;
                Emission::Gmm(gmm_m_step(g, series, &gsm)?)
            }
            Emission::LinearGaussian(_) => unreachable!("rejected by HmmModel::new"),
        };
        let counts = cfg.learn_transition.then(|| transition_counts(&model.transition, &loglik, &post));
        let initial = cfg.learn_initial.then(|| post.gamma.row(0).to_vec());
        let transition = transition_m_step(&model.transition, initial, counts.as_ref())?;
        model = HmmModel::new(transition, emission)?;
    }
    Ok(EmResult { model, trace, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_iterations_reports_initial_likelihood() {
        let tr = TransitionModel::uniform(2, 0.9).unwrap();
        let ar = ArEmission::new(vec![vec![0.5], vec![-0.5]], vec![1.0, 1.0], ArStart::Conditional).unwrap();
        let m = HmmModel::new(tr, Emission::Ar(ar)).unwrap();
        let v = TimeSeries::univariate(vec![0.1, 0.3, -0.2, 0.5, 0.4]).unwrap();
        let cfg = EmConfig { max_iter: 0, ..Default::default() };
        let r = em_fit(&m, &v, &cfg).unwrap();
        let ll = smooth_parallel(&m.transition, &m.emission.log_lik_table(&v).unwrap()).unwrap();
        assert_eq!(r.trace, vec![ll.log_likelihood]);
    }

    #[test]
    fn single_gaussian_one_step_gives_sample_moments() {
        let tr = TransitionModel::uniform(1, 1.0).unwrap();
        let g = GmmEmission::univariate(vec![vec![1.0]], vec![vec![5.0]], vec![vec![3.0]]).unwrap();
        let m = HmmModel::new(tr, Emission::Gmm(g)).unwrap();
        let data = vec![1.0, 2.0, 4.0, 7.0];
        let v = TimeSeries::univariate(data.clone()).unwrap();
        let r = em_fit(&m, &v, &EmConfig { max_iter: 1, tol: 0.0, ..Default::default() }).unwrap();
        let Emission::Gmm(fit) = &r.model.emission else { panic!() };
        let mean = data.iter().sum::<f64>() / 4.0;
        let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((fit.component(0, 0).mean()[0] - mean).abs() < 1e-12);
        assert!((fit.component(0, 0).cov()[(0, 0)] - var - COVARIANCE_FLOOR).abs() < 1e-12);
    }

    #[test]
    fn starved_regime_is_an_error() {
        let tr = TransitionModel::from_rows(vec![1.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let g = GmmEmission::univariate(vec![vec![1.0], vec![1.0]], vec![vec![0.0], vec![1.0]], vec![vec![1.0], vec![1.0]])
            .unwrap();
        let m = HmmModel::new(tr, Emission::Gmm(g)).unwrap();
        let v = TimeSeries::univariate(vec![0.0, 1.0, 0.5]).unwrap();
        let err = em_fit(&m, &v, &EmConfig { max_iter: 3, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::RegimeStarvation { regime: 1, .. }));
    }
}
