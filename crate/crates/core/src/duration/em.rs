//! EM for the emission parameters of explicit-duration models; `π` and `ρ` stay fixed.

use ndarray::Array3;

use super::{count_emission, dc_smooth_table, ic_smooth_with, CountIndexedTables};
use crate::discrete::em::{
    ar_m_step, ar_m_step_by_context, gmm_m_step, mixture_responsibilities, EmConfig, EmResult,
};
use crate::error::{Error, Result};
use crate::model::{DurationModel, Emission, TimeSeries};

/// Which count chain drives the E-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountKind {
    Decreasing,
    Increasing,
}

fn e_step(model: &DurationModel, series: &TimeSeries, kind: CountKind) -> Result<CountIndexedTables> {
    match kind {
        CountKind::Decreasing => {
            let ll = model.emission.log_lik_table(series)?;
            dc_smooth_table(&model.transition, &model.durations, model.boundary, &ll)
        }
        CountKind::Increasing => {
            let em = count_emission(model, series)?;
            ic_smooth_with(&model.transition, &model.durations, model.boundary, &em)
        }
    }
}

pub fn em_fit_duration(
    init: &DurationModel,
    series: &TimeSeries,
    kind: CountKind,
    cfg: &EmConfig,
) -> Result<EmResult<DurationModel>> {
    if series.len() <= init.emission.order() {
        return Err(Error::InvalidInput("series too short for the AR order".into()));
    }
    let mut model = init.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    loop {
        let post = e_step(&model, series, kind)?;
        trace.push(post.log_likelihood);
        let it = trace.len() - 1;
        if it > 0 && (trace[it] - trace[it - 1]).abs() < cfg.tol {
            converged = true;
            break;
        }
        if it == cfg.max_iter {
            break;
        }
        model.emission = match &model.emission {
            Emission::Ar(ar) if model.cut && kind == CountKind::Increasing => {
                let k = ar.order();
                let (n, s, dm) = post.gamma_sc.dim();
                let mut w = Array3::zeros((n, s, k + 1));
                for t in 0..n {
                    for r in 0..s {
                        for c in 1..=dm {
                            w[[t, r, k.min(c - 1).min(t)]] += post.gamma_sc[[t, r, c - 1]];
                        }
                    }
                }
                Emission::Ar(ar_m_step_by_context(ar, series, &w)?)
            }
            Emission::Ar(ar) => Emission::Ar(ar_m_step(ar, series, &post.gamma_s)?),
            Emission::Gmm(g) => {
                let ll = g.log_lik_table(series)?;
                let gsm = mixture_responsibilities(g, series, &post.gamma_s, &ll)?;
                Emission::Gmm(gmm_m_step(g, series, &gsm)?)
            }
            Emission::LinearGaussian(_) => unreachable!("rejected by DurationModel::new"),
        };
    }
    Ok(EmResult { model, trace, converged })
}
