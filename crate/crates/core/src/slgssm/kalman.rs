//! Gaussian beliefs over the continuous hidden state and the linear-Gaussian algebra on them.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::math::LN_2PI;
use crate::model::LinearGaussianRegime;

/// Largest diagonal jitter added before giving up on a Cholesky factorization.
pub const MAX_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub log_weight: f64,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov, log_weight: 0.0 }
    }

    pub fn with_log_weight(mut self, log_weight: f64) -> Self {
        self.log_weight = log_weight;
        self
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Result of conditioning on one observation.
#[derive(Debug, Clone)]
pub struct Correction {
    pub belief: GaussianBelief,
    /// `log p(v_t | ·)` under the predictive law.
    pub log_lik: f64,
    pub jittered: bool,
}

/// Reverse-time regression `h_t = Â h_{t+1} + m̂ + η̂`, `η̂ ~ N(0, noise_cov)`.
#[derive(Debug, Clone)]
pub struct KalmanWork {
    pub gain: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub noise_cov: DMatrix<f64>,
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let x = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
}

/// Cholesky factor, retrying with diagonal jitter up to [`MAX_JITTER`].
pub(crate) fn chol_jitter(m: &DMatrix<f64>, what: &str) -> Result<(Cholesky<f64, Dyn>, bool)> {
    if let Some(c) = m.clone().cholesky() {
        return Ok((c, false));
    }
    let mut eps = 1e-15;
    while eps <= MAX_JITTER {
        let j = m + DMatrix::identity(m.nrows(), m.ncols()) * eps;
        if let Some(c) = j.cholesky() {
            return Ok((c, true));
        }
        eps *= 10.0;
    }
    Err(Error::Numerical(format!("{what} is not PD after jitter {MAX_JITTER:e}")))
}

fn log_det(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>()
}

/// `log N(x; mean, cov)`.
pub fn log_gaussian(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let (c, _) = chol_jitter(cov, "covariance")?;
    let r = x - mean;
    let z = c.l().solve_lower_triangular(&r).ok_or_else(|| Error::Numerical("singular factor".into()))?;
    Ok(-0.5 * (x.len() as f64 * LN_2PI + log_det(&c) + z.norm_squared()))
}

/// `(A ĥ, A P Aᵀ + Σ_H)`.
pub fn predict(belief: &GaussianBelief, regime: &LinearGaussianRegime) -> (DVector<f64>, DMatrix<f64>) {
    let a = &regime.transition;
    let mean = a * &belief.mean;
    let mut cov = a * &belief.cov * a.transpose() + &regime.process_cov;
    symmetrize(&mut cov);
    (mean, cov)
}

/// Conditions `N(mean, cov)` on `v = B h + η_v` with a Joseph-form covariance update.
pub fn correct(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    regime: &LinearGaussianRegime,
    v: &[f64],
) -> Result<Correction> {
    let b = &regime.observation;
    if v.len() != b.nrows() {
        return Err(Error::Shape(format!("observation has dim {}, B has {} rows", v.len(), b.nrows())));
    }
    let v = DVector::from_column_slice(v);
    let pbt = cov * b.transpose();
    let mut innov_cov = b * &pbt + &regime.obs_cov;
    symmetrize(&mut innov_cov);
    let (chol, jittered) = chol_jitter(&innov_cov, "innovation covariance")?;
    let resid = &v - b * mean;
    let gain = chol.solve(&pbt.transpose()).transpose();
    let new_mean = mean + &gain * &resid;
    let ikb = DMatrix::identity(cov.nrows(), cov.ncols()) - &gain * b;
    let mut new_cov = &ikb * cov * ikb.transpose() + &gain * &regime.obs_cov * gain.transpose();
    symmetrize(&mut new_cov);
    let z = chol.l().solve_lower_triangular(&resid).ok_or_else(|| Error::Numerical("singular factor".into()))?;
    let log_lik = -0.5 * (v.len() as f64 * LN_2PI + log_det(&chol) + z.norm_squared());
    Ok(Correction { belief: GaussianBelief::new(new_mean, new_cov), log_lik, jittered })
}

/// One predict-correct step from a filtered belief.
pub fn kalman_predict_correct(
    belief: &GaussianBelief,
    regime: &LinearGaussianRegime,
    v: &[f64],
) -> Result<(GaussianBelief, f64)> {
    let c = step(belief, regime, v)?;
    Ok((c.belief, c.log_lik))
}

pub(crate) fn step(belief: &GaussianBelief, regime: &LinearGaussianRegime, v: &[f64]) -> Result<Correction> {
    let (m, p) = predict(belief, regime);
    correct(&m, &p, regime, v)
}

/// The reset law `N(μ^s, Σ^s)` conditioned on `v`.
pub fn reset_correct(regime: &LinearGaussianRegime, v: &[f64]) -> Result<Correction> {
    correct(&regime.reset_mean, &regime.reset_cov, regime, v)
}

/// Single Gaussian with the first two moments of a mixture; weights need not be normalized.
pub fn collapse<'a, I>(components: I) -> Option<GaussianBelief>
where
    I: IntoIterator<Item = (f64, &'a DVector<f64>, &'a DMatrix<f64>)> + Clone,
{
    let total: f64 = components.clone().into_iter().map(|(w, _, _)| w).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut mean: Option<DVector<f64>> = None;
    for (w, m, _) in components.clone() {
        let x = m * (w / total);
        mean = Some(match mean {
            None => x,
            Some(acc) => acc + x,
        });
    }
    let mean = mean?;
    let n = mean.len();
    let mut cov = DMatrix::zeros(n, n);
    for (w, m, p) in components {
        let d = m - &mean;
        cov += (p + &d * d.transpose()) * (w / total);
    }
    symmetrize(&mut cov);
    Some(GaussianBelief::new(mean, cov))
}

/// `Â = P Aᵀ (A P Aᵀ + Σ_H)⁻¹`, `m̂ = ĥ - Â A ĥ`, noise `P - Â A P` for the move into `next`.
pub fn reverse_dynamics(filtered: &GaussianBelief, next: &LinearGaussianRegime) -> Result<KalmanWork> {
    let a = &next.transition;
    let pat = &filtered.cov * a.transpose();
    let mut pred = a * &pat + &next.process_cov;
    symmetrize(&mut pred);
    let (chol, _) = chol_jitter(&pred, "predicted covariance")?;
    let gain = chol.solve(&pat.transpose()).transpose();
    let offset = &filtered.mean - &gain * (a * &filtered.mean);
    let mut noise_cov = &filtered.cov - &gain * a * &filtered.cov;
    symmetrize(&mut noise_cov);
    Ok(KalmanWork { gain, offset, noise_cov })
}

/// `p(h_t | h_{t+1} ~ smoothed, ·)` moments under a reverse regression.
pub fn backward_moments(work: &KalmanWork, smoothed: &GaussianBelief) -> GaussianBelief {
    let mean = &work.gain * &smoothed.mean + &work.offset;
    let mut cov = &work.gain * &smoothed.cov * work.gain.transpose() + &work.noise_cov;
    symmetrize(&mut cov);
    GaussianBelief::new(mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn scalar_regime(a: f64, b: f64, q: f64, r: f64) -> LinearGaussianRegime {
        LinearGaussianRegime {
            transition: DMatrix::from_element(1, 1, a),
            observation: DMatrix::from_element(1, 1, b),
            process_cov: DMatrix::from_element(1, 1, q),
            obs_cov: DMatrix::from_element(1, 1, r),
            reset_mean: DVector::from_element(1, 0.0),
            reset_cov: DMatrix::from_element(1, 1, 1.0),
        }
    }

    fn scalar(m: f64, p: f64) -> GaussianBelief {
        GaussianBelief::new(DVector::from_element(1, m), DMatrix::from_element(1, 1, p))
    }

    #[test]
    fn scalar_hand_case() {
        let reg = scalar_regime(1.0, 1.0, 1.0, 1.0);
        let (b, ll) = kalman_predict_correct(&scalar(0.0, 1.0), &reg, &[2.0]).unwrap();
        assert!((b.mean[0] - 4.0 / 3.0).abs() < 1e-14);
        assert!((b.cov[(0, 0)] - 2.0 / 3.0).abs() < 1e-14);
        assert!((ll - crate::math::log_normal(2.0, 0.0, 3.0)).abs() < 1e-14);
        let c = reset_correct(&reg, &[2.0]).unwrap();
        assert!((c.belief.mean[0] - 1.0).abs() < 1e-14);
        assert!((c.belief.cov[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn exact_observation_limit() {
        let reg = scalar_regime(0.7, 1.0, 0.5, 1e-12);
        let (b, _) = kalman_predict_correct(&scalar(3.0, 2.0), &reg, &[-1.5]).unwrap();
        assert!((b.mean[0] + 1.5).abs() < 1e-9);
    }

    #[test]
    fn static_state_variance_shrinks() {
        let reg = scalar_regime(1.0, 1.0, 0.0, 1.0);
        let mut b = scalar(0.0, 4.0);
        for _ in 0..20 {
            let prev = b.cov[(0, 0)];
            b = kalman_predict_correct(&b, &reg, &[0.3]).unwrap().0;
            assert!(b.cov[(0, 0)] < prev);
        }
    }

    #[test]
    fn collapse_of_one_component_is_identity() {
        let g = scalar(1.5, 0.25);
        let c = collapse([(0.3, &g.mean, &g.cov)]).unwrap();
        assert_eq!(c.mean, g.mean);
        assert!((c.cov[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn reverse_dynamics_reproduces_rts_step() {
        let reg = scalar_regime(0.9, 1.0, 0.4, 1.0);
        let f = scalar(0.5, 1.2);
        let s_next = scalar(0.2, 0.7);
        let w = reverse_dynamics(&f, &reg).unwrap();
        let out = backward_moments(&w, &s_next);
        let pp = 0.9 * 0.9 * 1.2 + 0.4;
        let j = 1.2 * 0.9 / pp;
        let m = 0.5 + j * (0.2 - 0.9 * 0.5);
        let p = 1.2 + j * j * (0.7 - pp);
        assert!((out.mean[0] - m).abs() < 1e-14);
        assert!((out.cov[(0, 0)] - p).abs() < 1e-14);
    }
}
