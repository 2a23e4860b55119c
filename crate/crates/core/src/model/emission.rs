//! Per-regime observation laws and their log-likelihood tables.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::math::{ln, log_normal, log_sum_exp, LN_2PI};
use crate::model::series::TimeSeries;
use crate::model::transition::check_prob_vector;

/// Multivariate normal with a cached Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianDensity {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::Shape(format!("covariance is {}x{}, mean has {d}", cov.nrows(), cov.ncols())));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidModel("covariance not PD".into()))?;
        let chol_l = chol.l();
        let log_det: f64 = 2.0 * chol_l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let log_norm = -0.5 * (d as f64 * LN_2PI + log_det);
        Ok(Self { mean, cov, chol_l, log_norm })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_iterator(x.len(), x.iter().zip(self.mean.iter()).map(|(a, b)| a - b));
        let z = self
            .chol_l
            .solve_lower_triangular(&diff)
            .expect("cholesky factor is non-singular");
        self.log_norm - 0.5 * z.norm_squared()
    }
}

/// Gaussian-mixture emission with `M` components per regime.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmEmission {
    weights: Vec<Vec<f64>>,
    components: Vec<Vec<GaussianDensity>>,
    /// Optional `p(m_t | m_{t-1}, s_t)` as `[s][m_t][m_{t-1}]`, column-stochastic per regime.
    chain: Option<Vec<Vec<Vec<f64>>>>,
}

impl GmmEmission {
    pub fn new(
        weights: Vec<Vec<f64>>,
        means: Vec<Vec<DVector<f64>>>,
        covs: Vec<Vec<DMatrix<f64>>>,
    ) -> Result<Self> {
        let s = weights.len();
        if s == 0 || means.len() != s || covs.len() != s {
            return Err(Error::Shape("mixture weights, means and covariances disagree on S".into()));
        }
        let m = weights[0].len();
        let mut comps = Vec::with_capacity(s);
        let mut norm_weights = Vec::with_capacity(s);
        for r in 0..s {
            if weights[r].len() != m || means[r].len() != m || covs[r].len() != m {
                return Err(Error::Shape(format!("regime {r} does not have {m} components")));
            }
            check_prob_vector(&weights[r], &format!("mixture weights of regime {r}"))?;
            let tot: f64 = weights[r].iter().sum();
            norm_weights.push(weights[r].iter().map(|w| w / tot).collect());
            let mut row = Vec::with_capacity(m);
            for c in 0..m {
                check_pd(&covs[r][c], 1e-10, &format!("covariance ({r},{c})"))?;
                row.push(GaussianDensity::new(means[r][c].clone(), covs[r][c].clone())?);
            }
            comps.push(row);
        }
        let dim = comps[0][0].mean.len();
        if comps.iter().flatten().any(|g| g.mean.len() != dim) {
            return Err(Error::Shape("mixture components differ in dimension".into()));
        }
        Ok(Self { weights: norm_weights, components: comps, chain: None })
    }

    /// Scalar convenience constructor: `means[s][m]`, `vars[s][m]`.
    pub fn univariate(weights: Vec<Vec<f64>>, means: Vec<Vec<f64>>, vars: Vec<Vec<f64>>) -> Result<Self> {
        let mu = means
            .iter()
            .map(|r| r.iter().map(|&x| DVector::from_element(1, x)).collect())
            .collect();
        let cv = vars
            .iter()
            .map(|r| r.iter().map(|&x| DMatrix::from_element(1, 1, x)).collect())
            .collect();
        Self::new(weights, mu, cv)
    }

    pub fn with_chain(mut self, chain: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let (s, m) = (self.n_regimes(), self.n_components());
        if chain.len() != s {
            return Err(Error::Shape("mixture chain needs one matrix per regime".into()));
        }
        let mut normed = Vec::with_capacity(s);
        for (r, mat) in chain.iter().enumerate() {
            if mat.len() != m || mat.iter().any(|row| row.len() != m) {
                return Err(Error::Shape(format!("mixture chain of regime {r} must be {m}x{m}")));
            }
            let mut out = vec![vec![0.0; m]; m];
            for from in 0..m {
                let col: Vec<f64> = (0..m).map(|to| mat[to][from]).collect();
                check_prob_vector(&col, &format!("mixture chain column {from} of regime {r}"))?;
                let tot: f64 = col.iter().sum();
                for to in 0..m {
                    out[to][from] = col[to] / tot;
                }
            }
            normed.push(out);
        }
        self.chain = Some(normed);
        Ok(self)
    }

    pub fn n_regimes(&self) -> usize {
        self.weights.len()
    }

    pub fn n_components(&self) -> usize {
        self.weights[0].len()
    }

    pub fn dim(&self) -> usize {
        self.components[0][0].mean.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn component(&self, regime: usize, m: usize) -> &GaussianDensity {
        &self.components[regime][m]
    }

    pub fn chain(&self) -> Option<&Vec<Vec<Vec<f64>>>> {
        self.chain.as_ref()
    }

    /// `log p(v_t | s, m)` as a `T × S × M` table.
    pub fn component_table(&self, series: &TimeSeries) -> Result<Array3<f64>> {
        self.check_dim(series)?;
        let (s, m) = (self.n_regimes(), self.n_components());
        let mut out = Array3::zeros((series.len(), s, m));
        for t in 0..series.len() {
            let v = series.row(t);
            for r in 0..s {
                for c in 0..m {
                    out[[t, r, c]] = self.components[r][c].log_pdf(v);
                }
            }
        }
        Ok(out)
    }

    /// `log Σ_m p(m|s) p(v_t|s,m)` as a `T × S` table.
    pub fn log_lik_table(&self, series: &TimeSeries) -> Result<Array2<f64>> {
        let comp = self.component_table(series)?;
        let (s, m) = (self.n_regimes(), self.n_components());
        let mut out = Array2::zeros((series.len(), s));
        let mut buf = vec![0.0; m];
        for t in 0..series.len() {
            for r in 0..s {
                for c in 0..m {
                    buf[c] = ln(self.weights[r][c]) + comp[[t, r, c]];
                }
                out[[t, r]] = log_sum_exp(&buf);
            }
        }
        Ok(out)
    }

    fn check_dim(&self, series: &TimeSeries) -> Result<()> {
        if series.dim() != self.dim() {
            return Err(Error::Shape(format!(
                "series has D={}, emission expects D={}",
                series.dim(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Law of the first `k` observations of an autoregressive emission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArStart {
    /// The first `k` observations contribute no likelihood term.
    Conditional,
    /// The first `k` observations regress on however many lags exist.
    Truncated,
    /// The first `k` observations are i.i.d. `N(mean, var)` in every regime.
    Gaussian { mean: f64, var: f64 },
}

/// Univariate switching autoregression `v_t = Σ_i a^s_i v_{t-i} + η_t`, `η_t ~ N(0, σ²_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArEmission {
    coeffs: Vec<Vec<f64>>,
    noise_var: Vec<f64>,
    start: ArStart,
}

impl ArEmission {
    pub fn new(coeffs: Vec<Vec<f64>>, noise_var: Vec<f64>, start: ArStart) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() != noise_var.len() {
            return Err(Error::Shape("AR coefficients and noise variances disagree on S".into()));
        }
        let k = coeffs[0].len();
        if coeffs.iter().any(|c| c.len() != k) {
            return Err(Error::Shape("AR coefficient vectors differ in length".into()));
        }
        if coeffs.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::InvalidModel("non-finite AR coefficient".into()));
        }
        if noise_var.iter().any(|&v| !(v > 1e-10) || !v.is_finite()) {
            return Err(Error::InvalidModel("AR noise variance: covariance not PD".into()));
        }
        if let ArStart::Gaussian { var, .. } = start {
            if !(var > 1e-10) {
                return Err(Error::InvalidModel("AR start variance: covariance not PD".into()));
            }
        }
        Ok(Self { coeffs, noise_var, start })
    }

    pub fn order(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn n_regimes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn noise_var(&self) -> &[f64] {
        &self.noise_var
    }

    pub fn start(&self) -> ArStart {
        self.start
    }

    /// Copy with a different start law.
    pub fn with_start(&self, start: ArStart) -> Self {
        Self { start, ..self.clone() }
    }

    /// `log N(v_t; Σ_{i≤lags} a_i v_{t-i}, σ²)` with 0-based `t` and `lags ≤ min(k, t)`.
    #[inline]
    pub fn log_density(&self, series: &TimeSeries, t: usize, regime: usize, lags: usize) -> f64 {
        debug_assert!(lags <= self.order() && lags <= t);
        let a = &self.coeffs[regime];
        let mut mean = 0.0;
        for i in 1..=lags {
            mean += a[i - 1] * series.scalar(t - i);
        }
        log_normal(series.scalar(t), mean, self.noise_var[regime])
    }

    /// `log p(v_t | s_t, v_{t-k:t-1})` as a `T × S` table, applying the start law for `t < k`.
    pub fn log_lik_table(&self, series: &TimeSeries) -> Result<Array2<f64>> {
        series.require_univariate()?;
        let k = self.order();
        let s = self.n_regimes();
        let mut out = Array2::zeros((series.len(), s));
        for t in 0..series.len() {
            for r in 0..s {
                out[[t, r]] = if t >= k {
                    self.log_density(series, t, r, k)
                } else {
                    match self.start {
                        ArStart::Conditional => 0.0,
                        ArStart::Truncated => self.log_density(series, t, r, t),
                        ArStart::Gaussian { mean, var } => log_normal(series.scalar(t), mean, var),
                    }
                };
            }
        }
        Ok(out)
    }

    /// `log N` with each possible context length: entry `[t, s, l]` uses `l` lags for `l ≤ min(k, t)`.
    ///
    /// Entries with `l > t` are NaN.
    pub fn context_table(&self, series: &TimeSeries) -> Result<Array3<f64>> {
        series.require_univariate()?;
        let k = self.order();
        let s = self.n_regimes();
        let mut out = Array3::from_elem((series.len(), s, k + 1), f64::NAN);
        for t in 0..series.len() {
            for r in 0..s {
                for l in 0..=k.min(t) {
                    out[[t, r, l]] = self.log_density(series, t, r, l);
                }
            }
        }
        Ok(out)
    }
}

/// Parameters of one regime of a switching linear Gaussian state-space model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianRegime {
    /// Hidden dynamics `A` (H×H).
    pub transition: DMatrix<f64>,
    /// Observation map `B` (D×H).
    pub observation: DMatrix<f64>,
    pub process_cov: DMatrix<f64>,
    pub obs_cov: DMatrix<f64>,
    /// Law of the hidden state at `t = 1` and after a reset.
    pub reset_mean: DVector<f64>,
    pub reset_cov: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianEmission {
    regimes: Vec<LinearGaussianRegime>,
}

impl LinearGaussianEmission {
    pub fn new(regimes: Vec<LinearGaussianRegime>) -> Result<Self> {
        let first = regimes.first().ok_or_else(|| Error::InvalidModel("no regimes".into()))?;
        let h = first.transition.nrows();
        let d = first.observation.nrows();
        for (i, r) in regimes.iter().enumerate() {
            let shapes = [
                (r.transition.shape(), (h, h), "A"),
                (r.observation.shape(), (d, h), "B"),
                (r.process_cov.shape(), (h, h), "Σ_H"),
                (r.obs_cov.shape(), (d, d), "Σ_V"),
                (r.reset_cov.shape(), (h, h), "reset covariance"),
            ];
            for (got, want, name) in shapes {
                if got != want {
                    return Err(Error::Shape(format!("regime {i}: {name} is {got:?}, expected {want:?}")));
                }
            }
            if r.reset_mean.len() != h {
                return Err(Error::Shape(format!("regime {i}: reset mean has wrong length")));
            }
            check_pd(&r.obs_cov, 1e-10, &format!("regime {i} Σ_V"))?;
            check_psd(&r.process_cov, &format!("regime {i} Σ_H"))?;
            check_psd(&r.reset_cov, &format!("regime {i} reset covariance"))?;
        }
        Ok(Self { regimes })
    }

    pub fn n_regimes(&self) -> usize {
        self.regimes.len()
    }

    pub fn hidden_dim(&self) -> usize {
        self.regimes[0].transition.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.regimes[0].observation.nrows()
    }

    #[inline]
    pub fn regime(&self, s: usize) -> &LinearGaussianRegime {
        &self.regimes[s]
    }

    pub fn regimes(&self) -> &[LinearGaussianRegime] {
        &self.regimes
    }
}

/// Observation law attached to a regime chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    Gmm(GmmEmission),
    Ar(ArEmission),
    LinearGaussian(LinearGaussianEmission),
}

impl Emission {
    pub fn n_regimes(&self) -> usize {
        match self {
            Emission::Gmm(g) => g.n_regimes(),
            Emission::Ar(a) => a.n_regimes(),
            Emission::LinearGaussian(l) => l.n_regimes(),
        }
    }

    /// Autoregressive order; zero for non-AR emissions.
    pub fn order(&self) -> usize {
        match self {
            Emission::Ar(a) => a.order(),
            _ => 0,
        }
    }

    /// Per-step log-likelihood table for emissions that factorise given the regime.
    pub fn log_lik_table(&self, series: &TimeSeries) -> Result<Array2<f64>> {
        match self {
            Emission::Gmm(g) => g.log_lik_table(series),
            Emission::Ar(a) => a.log_lik_table(series),
            Emission::LinearGaussian(_) => Err(Error::InvalidInput(
                "linear-Gaussian emissions have no per-step likelihood table".into(),
            )),
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub(crate) fn check_pd(m: &DMatrix<f64>, floor: f64, what: &str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) || !is_symmetric(m) || !(min_eigenvalue(m) > floor) {
        return Err(Error::InvalidModel(format!("{what}: covariance not PD")));
    }
    Ok(())
}

pub(crate) fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) || !is_symmetric(m) || min_eigenvalue(m) < -1e-10 {
        return Err(Error::InvalidModel(format!("{what}: covariance not PSD")));
    }
    Ok(())
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= 1e-12 * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_density_matches_scalar_formula() {
        let g = GaussianDensity::new(DVector::from_element(1, 1.0), DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert!((g.log_pdf(&[0.3]) - log_normal(0.3, 1.0, 2.0)).abs() < 1e-14);
    }

    #[test]
    fn ar_start_policies() {
        let series = TimeSeries::univariate(vec![1.0, 2.0, 3.0]).unwrap();
        let ar = ArEmission::new(vec![vec![0.5, 0.1]], vec![1.0], ArStart::Conditional).unwrap();
        let tab = ar.log_lik_table(&series).unwrap();
        assert_eq!(tab[[0, 0]], 0.0);
        assert_eq!(tab[[1, 0]], 0.0);
        assert!((tab[[2, 0]] - log_normal(3.0, 0.5 * 2.0 + 0.1 * 1.0, 1.0)).abs() < 1e-15);
        let tr = ar.with_start(ArStart::Truncated).log_lik_table(&series).unwrap();
        assert!((tr[[1, 0]] - log_normal(2.0, 0.5, 1.0)).abs() < 1e-15);
        let ctx = ar.context_table(&series).unwrap();
        assert!(ctx[[0, 0, 1]].is_nan());
        assert_eq!(ctx[[2, 0, 2]], tab[[2, 0]]);
    }

    #[test]
    fn negative_eigenvalue_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = check_pd(&m, 1e-10, "Σ_V").unwrap_err();
        assert!(err.to_string().contains("covariance not PD"));
    }
}
