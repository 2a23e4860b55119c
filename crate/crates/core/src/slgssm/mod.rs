//! Switching linear Gaussian state-space models: collapsing filters and smoothers, the
//! duration-count extensions, and the exact reset variants.

pub mod config;
mod exact;
mod filter;
pub mod kalman;
mod smooth;

use ndarray::Array2;

pub use config::{ConfigSpace, Link, Pred};
pub use filter::{
    changepoint_two_state, dur_filter_dc, dur_filter_dc_naive, dur_filter_dc_reset, dur_filter_ic_reset,
    slgssm_filter, slgssm_filter_with, FilterOptions,
};
pub use kalman::{
    backward_moments, collapse, correct, kalman_predict_correct, log_gaussian, predict, reset_correct,
    reverse_dynamics, Correction, GaussianBelief, KalmanWork, MAX_JITTER,
};
pub use smooth::slgssm_smooth;

use crate::error::{Error, Result};
use crate::model::{SlgssmModel, SlgssmVariant, TimeSeries};

/// One Gaussian of an exact filtered mixture; `belief.log_weight` is `log p(τ | σ_t, v_{1:t})`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    /// 1-based time of the last hidden-state reset.
    pub reset_time: usize,
    pub belief: GaussianBelief,
}

/// Beliefs over every configuration `σ` at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchBeliefState {
    /// Normalized `log p(σ | v)`; `-inf` for unreachable configurations.
    pub log_weights: Vec<f64>,
    /// Moment-matched `p(h_t | σ, v)`, `None` where the weight is zero.
    pub beliefs: Vec<Option<GaussianBelief>>,
    /// Exact mixtures per configuration, present in exact mode only.
    pub mixtures: Option<Vec<Vec<MixtureComponent>>>,
}

impl SwitchBeliefState {
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn n_components(&self) -> usize {
        match &self.mixtures {
            Some(m) => m.iter().map(Vec::len).sum(),
            None => self.beliefs.iter().filter(|b| b.is_some()).count(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub variant: SlgssmVariant,
    pub space: ConfigSpace,
    pub states: Vec<SwitchBeliefState>,
    /// `log p(v_{1:T})` under the filter's own (possibly collapsed) predictive laws.
    pub log_likelihood: f64,
    /// Factorizations that needed diagonal jitter.
    pub jitter_count: usize,
}

impl FilterOutput {
    /// `[t, s]`: `p(s_t | v)` summed over counts.
    pub fn regime_weights(&self) -> Array2<f64> {
        regime_weights(&self.space, &self.states)
    }
}

pub fn regime_weights(space: &ConfigSpace, states: &[SwitchBeliefState]) -> Array2<f64> {
    let mut out = Array2::zeros((states.len(), space.n_regimes));
    for (t, st) in states.iter().enumerate() {
        for (sigma, w) in st.log_weights.iter().enumerate() {
            out[[t, space.regime(sigma)]] += w.exp();
        }
    }
    out
}

pub(crate) fn check_series(model: &SlgssmModel, series: &TimeSeries) -> Result<()> {
    if series.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    let d = model.emission.obs_dim();
    if series.dim() != d {
        return Err(Error::Shape(format!("series has dim {}, model observes dim {d}", series.dim())));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
