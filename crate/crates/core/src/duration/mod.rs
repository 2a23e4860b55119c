//! Explicit-duration inference with a single chain of count variables.

pub mod dc;
pub mod em;
pub mod ic;

use ndarray::{Array2, Array3, Axis};

pub use dc::{
    dc_backward, dc_forward, dc_forward_naive, dc_path_log_joint, dc_smooth_table, dc_viterbi_table,
};
pub use em::{em_fit_duration, CountKind};
pub use ic::{ic_backward, ic_forward, ic_smooth_with, CountEmission};

use crate::discrete::hmm::check_table;
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::{Boundary, DurationLaw, DurationModel, Emission, TimeSeries, TransitionModel};

/// Posteriors over `σ_t = (s_t, c_t)`; count `c` is stored at index `c - 1`.
#[derive(Debug, Clone)]
pub struct CountIndexedTables {
    pub log_alpha: Array3<f64>,
    pub log_beta: Array3<f64>,
    pub gamma_sc: Array3<f64>,
    pub gamma_s: Array2<f64>,
    pub log_likelihood: f64,
}

/// A decoded `(s_t, c_t)` sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CountPath {
    pub regimes: Vec<usize>,
    pub counts: Vec<usize>,
    pub log_joint: f64,
}

pub(crate) fn check_inputs(
    tr: &TransitionModel,
    law: &DurationLaw,
    boundary: Boundary,
    loglik: &Array2<f64>,
) -> Result<()> {
    check_table(tr, loglik)?;
    if law.n_regimes() != tr.n_regimes() {
        return Err(Error::Shape("duration law and transition disagree on S".into()));
    }
    if boundary == Boundary::Strict && law.d_min() > loglik.nrows() {
        return Err(Error::NoValidPath(format!(
            "strict boundary with d_min={} exceeds T={}",
            law.d_min(),
            loglik.nrows()
        )));
    }
    Ok(())
}

pub(crate) fn finish_tables(log_alpha: Array3<f64>, log_beta: Array3<f64>) -> CountIndexedTables {
    let (n, s, d) = log_alpha.dim();
    let log_likelihood = log_sum_exp(log_alpha.index_axis(Axis(0), n - 1).as_slice().unwrap());
    let mut gamma_sc = Array3::zeros((n, s, d));
    let mut gamma_s = Array2::zeros((n, s));
    let mut buf = vec![0.0; s * d];
    for t in 0..n {
        for r in 0..s {
            for c in 0..d {
                buf[r * d + c] = log_alpha[[t, r, c]] + log_beta[[t, r, c]];
            }
        }
        let z = log_sum_exp(&buf);
        for r in 0..s {
            for c in 0..d {
                let g = (buf[r * d + c] - z).exp();
                gamma_sc[[t, r, c]] = g;
            }
            gamma_s[[t, r]] = (0..d).map(|c| gamma_sc[[t, r, c]]).sum();
        }
    }
    CountIndexedTables { log_alpha, log_beta, gamma_sc, gamma_s, log_likelihood }
}

/// Decreasing-count smoothing for a model; the emission must factorise per step.
pub fn dc_smooth(model: &DurationModel, series: &TimeSeries) -> Result<CountIndexedTables> {
    let ll = model.emission.log_lik_table(series)?;
    dc_smooth_table(&model.transition, &model.durations, model.boundary, &ll)
}

pub fn dc_viterbi(model: &DurationModel, series: &TimeSeries) -> Result<CountPath> {
    let ll = model.emission.log_lik_table(series)?;
    dc_viterbi_table(&model.transition, &model.durations, model.boundary, &ll)
}

/// Emission source of an increasing-count model: truncated AR context when `cut` is set.
pub fn count_emission(model: &DurationModel, series: &TimeSeries) -> Result<CountEmission> {
    match (&model.emission, model.cut) {
        (Emission::Ar(ar), true) => Ok(CountEmission::ByContext {
            table: ar.context_table(series)?,
            order: ar.order(),
        }),
        (e, _) => Ok(CountEmission::PerStep(e.log_lik_table(series)?)),
    }
}

/// Increasing-count smoothing for a model.
pub fn ic_smooth(model: &DurationModel, series: &TimeSeries) -> Result<CountIndexedTables> {
    let em = count_emission(model, series)?;
    ic_smooth_with(&model.transition, &model.durations, model.boundary, &em)
}
