//! Reference experiments: switching AR segmentation with geometric vs uniform durations, and the
//! switching sinusoid comparing a mixture HMM against a second-order SARM.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discrete::EmConfig;
use crate::error::Result;
use crate::model::{
    ArEmission, ArStart, Boundary, DurationLaw, DurationModel, Emission, GmmEmission, HmmModel, Model, TimeSeries,
    TransitionModel,
};
use crate::pipeline::{decode, fit, smooth};
use crate::synth::{
    gen_sarm_switching, gen_switching_sinusoid, reference_duration_law, segmentation_error,
    segmentation_error_best_permutation, LabeledSeries, SarmParams, REFERENCE_SWITCHES,
};

/// Self-transition of the geometric-duration SARM: mean duration 40.
pub const GSARM_STAY: f64 = 1.0 - 1.0 / 40.0;

/// The first `k` samples of generated series are `N(0, 1)`.
fn warmup_start() -> ArStart {
    ArStart::Gaussian { mean: 0.0, var: 1.0 }
}

fn ar(params: &SarmParams) -> Result<ArEmission> {
    ArEmission::new(params.coeffs.clone(), params.noise_var.clone(), warmup_start())
}

/// SARM with geometric durations (`π_ii = 1 - 1/40`).
pub fn gsarm(params: &SarmParams) -> Result<Model> {
    let tr = TransitionModel::uniform(params.n_regimes(), GSARM_STAY)?;
    Ok(Model::Sarm(HmmModel::new(tr, Emission::Ar(ar(params)?))?))
}

/// SARM with explicit durations (`π_ii = 0`) and decreasing counts.
pub fn usarm(params: &SarmParams, law: &DurationLaw) -> Result<Model> {
    let tr = TransitionModel::uniform(params.n_regimes(), 0.0)?;
    Ok(Model::DurationDc(DurationModel::new(
        tr,
        law.clone(),
        Emission::Ar(ar(params)?),
        Boundary::Strict,
        false,
    )?))
}

/// Deliberately poor starting point for EM.
pub fn bad_init_params() -> SarmParams {
    SarmParams {
        coeffs: vec![vec![0.8, -0.99, 0.0], vec![-0.65, 0.2, 0.1], vec![0.9, -0.35, -0.3]],
        noise_var: vec![100.0; 3],
    }
}

/// Segmentation errors of the two SARMs under smoothing and Viterbi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SarmErrors {
    pub gsarm_smooth: f64,
    pub gsarm_viterbi: f64,
    pub usarm_smooth: f64,
    pub usarm_viterbi: f64,
}

pub fn sarm_data(seed: u64) -> Result<LabeledSeries> {
    let p = SarmParams::reference_defaults();
    gen_sarm_switching(&p, &reference_duration_law(p.n_regimes()), REFERENCE_SWITCHES, seed)
}

fn errors(g: &Model, u: &Model, data: &LabeledSeries, permute: bool) -> Result<SarmErrors> {
    let err = |est: &[usize]| {
        if permute {
            segmentation_error_best_permutation(est, &data.true_regimes)
        } else {
            segmentation_error(est, &data.true_regimes)
        }
    };
    let v = &data.series;
    Ok(SarmErrors {
        gsarm_smooth: err(&smooth(g, v)?.regimes)?,
        gsarm_viterbi: err(&decode(g, v)?.regimes)?,
        usarm_smooth: err(&smooth(u, v)?.regimes)?,
        usarm_viterbi: err(&decode(u, v)?.regimes)?,
    })
}

/// Both SARMs with the generating parameters; labels are compared as is.
pub fn known_parameter_run(seed: u64) -> Result<SarmErrors> {
    let data = sarm_data(seed)?;
    let p = SarmParams::reference_defaults();
    errors(&gsarm(&p)?, &usarm(&p, &reference_duration_law(3))?, &data, false)
}

/// EM from [`bad_init_params`] with transitions and durations held fixed.
pub fn em_run(seed: u64, max_iter: usize) -> Result<SarmErrors> {
    let data = sarm_data(seed)?;
    let init = bad_init_params();
    let cfg = EmConfig { max_iter, tol: 1e-6, learn_initial: false, learn_transition: false };
    let g = fit(&gsarm(&init)?, &data.series, &cfg)?.model;
    let u = fit(&usarm(&init, &reference_duration_law(3))?, &data.series, &cfg)?.model;
    errors(&g, &u, &data, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinusoidErrors {
    pub gmm: f64,
    pub sarm: f64,
}

const SINUSOID_RESTARTS: usize = 5;

fn sinusoid_gmm_init<R: Rng + ?Sized>(rng: &mut R, v: &TimeSeries) -> Result<Model> {
    let (lo, hi) = v.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let means = (0..2)
        .map(|_| {
            let mut m: Vec<f64> = (0..3).map(|_| rng.random_range(lo..hi)).collect();
            m.sort_by(f64::total_cmp);
            m
        })
        .collect();
    let g = GmmEmission::univariate(vec![vec![1.0 / 3.0; 3]; 2], means, vec![vec![0.25; 3]; 2])?;
    Ok(Model::HmmGmm(HmmModel::new(TransitionModel::uniform(2, 0.95)?, Emission::Gmm(g))?))
}

fn sinusoid_sarm_init<R: Rng + ?Sized>(rng: &mut R, v: &TimeSeries) -> Result<Model> {
    let var = {
        let x = v.values();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / x.len() as f64
    };
    let coeffs = (0..2).map(|_| vec![rng.random_range(0.0..2.0), rng.random_range(-1.0..0.0)]).collect();
    let a = ArEmission::new(coeffs, vec![var; 2], ArStart::Conditional)?;
    Ok(Model::Sarm(HmmModel::new(TransitionModel::uniform(2, 0.95)?, Emission::Ar(a))?))
}

/// Best of several seeded EM restarts by final log-likelihood.
fn best_fit(
    series: &TimeSeries,
    rng: &mut ChaCha8Rng,
    init: fn(&mut ChaCha8Rng, &TimeSeries) -> Result<Model>,
) -> Result<Model> {
    let cfg = EmConfig { max_iter: 200, tol: 1e-8, ..EmConfig::default() };
    let mut best: Option<(f64, Model)> = None;
    let mut last_err = None;
    for _ in 0..SINUSOID_RESTARTS {
        match fit(&init(rng, series)?, series, &cfg) {
            Ok(r) => {
                let ll = *r.trace.last().expect("non-empty trace");
                if best.as_ref().is_none_or(|(b, _)| ll > *b) {
                    best = Some((ll, r.model));
                }
            }
            Err(e) if e.is_numerical() => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    match (best, last_err) {
        (Some((_, m)), _) => Ok(m),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one restart"),
    }
}

/// Two-regime HMM with a 3-component mixture vs two-regime SARM of order 2, both fitted by EM.
pub fn sinusoid_run(seed: u64) -> Result<SinusoidErrors> {
    let data = gen_switching_sinusoid(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151);
    let gmm = best_fit(&data.series, &mut rng, sinusoid_gmm_init)?;
    let sarm = best_fit(&data.series, &mut rng, sinusoid_sarm_init)?;
    Ok(SinusoidErrors {
        gmm: segmentation_error_best_permutation(&smooth(&gmm, &data.series)?.regimes, &data.true_regimes)?,
        sarm: segmentation_error_best_permutation(&smooth(&sarm, &data.series)?.regimes, &data.true_regimes)?,
    })
}
