//! Smoothing, decoding, sampling and EM behind one entry point per task for any [`Model`].

use ndarray::Array2;
use rand::Rng;

use crate::discrete::{self, em_fit, posterior_mode, smooth_gmm, smooth_gmm_chained, EmConfig, EmResult};
use crate::duration::{dc_smooth, dc_viterbi, em_fit_duration, ic_smooth, CountKind};
use crate::error::{Error, Result};
use crate::model::{Emission, Model, TimeSeries};
use crate::segmental::{emission_segments, seg_sample_path, seg_smooth, seg_viterbi};
use crate::slgssm::{regime_weights, slgssm_filter, slgssm_smooth};

/// Per-step regime posteriors and their pointwise argmax.
#[derive(Debug, Clone)]
pub struct Segmentation {
    /// `[t, s] = p(s_t | v_{1:T})`.
    pub gamma: Array2<f64>,
    pub regimes: Vec<usize>,
    pub log_likelihood: f64,
}

impl Segmentation {
    fn new(gamma: Array2<f64>, log_likelihood: f64) -> Self {
        let regimes = posterior_mode(&gamma);
        Self { gamma, regimes, log_likelihood }
    }
}

/// A jointly most likely path; `counts` holds the duration counts when the model has them.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub regimes: Vec<usize>,
    pub counts: Option<Vec<usize>>,
    pub log_joint: f64,
}

pub fn smooth(model: &Model, series: &TimeSeries) -> Result<Segmentation> {
    match model {
        Model::HmmGmm(m) => {
            let Emission::Gmm(g) = &m.emission else {
                return Err(Error::InvalidModel("hmm_gmm model without a mixture emission".into()));
            };
            let p = match g.chain() {
                Some(_) => smooth_gmm_chained(&m.transition, g, series)?,
                None => smooth_gmm(&m.transition, g, series)?,
            };
            Ok(Segmentation::new(p.gamma, p.log_likelihood))
        }
        Model::Sarm(m) => {
            let ll = m.emission.log_lik_table(series)?;
            let p = discrete::smooth_parallel(&m.transition, &ll)?;
            Ok(Segmentation::new(p.gamma, p.log_likelihood))
        }
        Model::DurationDc(m) => {
            let p = dc_smooth(m, series)?;
            Ok(Segmentation::new(p.gamma_s, p.log_likelihood))
        }
        Model::DurationIc(m) => {
            let p = ic_smooth(m, series)?;
            Ok(Segmentation::new(p.gamma_s, p.log_likelihood))
        }
        Model::Segmental(m) => {
            let (tables, p) = seg_smooth(m, series, true)?;
            Ok(Segmentation::new(p.gamma_s, tables.log_likelihood))
        }
        Model::Slgssm(m) => {
            let filtered = slgssm_filter(m, series)?;
            let states = slgssm_smooth(&filtered, m)?;
            Ok(Segmentation::new(regime_weights(&filtered.space, &states), filtered.log_likelihood))
        }
    }
}

pub fn decode(model: &Model, series: &TimeSeries) -> Result<Decoded> {
    match model {
        Model::HmmGmm(m) | Model::Sarm(m) => {
            if let Emission::Gmm(g) = &m.emission {
                if g.chain().is_some() {
                    return Err(Error::Contract("no Viterbi decoder for chained mixture components".into()));
                }
            }
            let ll = m.emission.log_lik_table(series)?;
            let v = discrete::viterbi(&m.transition, &ll)?;
            Ok(Decoded { regimes: v.path, counts: None, log_joint: v.log_joint })
        }
        Model::DurationDc(m) => {
            let p = dc_viterbi(m, series)?;
            Ok(Decoded { regimes: p.regimes, counts: Some(p.counts), log_joint: p.log_joint })
        }
        Model::Segmental(m) => {
            let provider = emission_segments(&m.emission, series)?;
            let p = seg_viterbi(m, provider.as_ref())?;
            Ok(Decoded { regimes: p.regimes, counts: Some(p.counts), log_joint: p.log_joint })
        }
        Model::DurationIc(_) | Model::Slgssm(_) => {
            Err(Error::Contract(format!("no Viterbi decoder for {} models", model.type_name())))
        }
    }
}

/// One regime path drawn from the posterior.
pub fn sample<R: Rng + ?Sized>(model: &Model, series: &TimeSeries, rng: &mut R) -> Result<Vec<usize>> {
    match model {
        Model::HmmGmm(m) | Model::Sarm(m) => {
            if let Emission::Gmm(g) = &m.emission {
                if g.chain().is_some() {
                    return Err(Error::Contract("no posterior sampler for chained mixture components".into()));
                }
            }
            let ll = m.emission.log_lik_table(series)?;
            discrete::sample_path(&m.transition, &ll, rng)
        }
        Model::Segmental(m) => {
            let (tables, _) = seg_smooth(m, series, true)?;
            Ok(seg_sample_path(m, &tables, rng)?.regimes)
        }
        _ => Err(Error::Contract(format!("no posterior sampler for {} models", model.type_name()))),
    }
}

/// EM from `init`; duration models re-estimate the emission only.
pub fn fit(init: &Model, series: &TimeSeries, cfg: &EmConfig) -> Result<EmResult<Model>> {
    fn wrap<M>(r: EmResult<M>, f: impl FnOnce(M) -> Model) -> EmResult<Model> {
        EmResult { model: f(r.model), trace: r.trace, converged: r.converged }
    }
    match init {
        Model::HmmGmm(m) => Ok(wrap(em_fit(m, series, cfg)?, Model::HmmGmm)),
        Model::Sarm(m) => Ok(wrap(em_fit(m, series, cfg)?, Model::Sarm)),
        Model::DurationDc(m) => Ok(wrap(em_fit_duration(m, series, CountKind::Decreasing, cfg)?, Model::DurationDc)),
        Model::DurationIc(m) => Ok(wrap(em_fit_duration(m, series, CountKind::Increasing, cfg)?, Model::DurationIc)),
        Model::Segmental(_) | Model::Slgssm(_) => {
            Err(Error::Contract(format!("no EM for {} models", init.type_name())))
        }
    }
}
