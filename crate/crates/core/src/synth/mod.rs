//! Synthetic labeled series and the segmentation-error metric.

pub mod instances;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{DurationLaw, DurationSpec, TimeSeries};

/// A series with the regime labels that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub series: TimeSeries,
    pub true_regimes: Vec<usize>,
    /// 0-based index of the first step of every segment.
    pub true_boundaries: Vec<usize>,
    pub seed: u64,
}

impl LabeledSeries {
    fn from_segments(values: Vec<f64>, segs: &[(usize, usize)], seed: u64) -> Result<Self> {
        let mut true_regimes = Vec::with_capacity(values.len());
        let mut true_boundaries = Vec::with_capacity(segs.len());
        for &(s, d) in segs {
            true_boundaries.push(true_regimes.len());
            true_regimes.extend(std::iter::repeat_n(s, d));
        }
        Ok(Self { series: TimeSeries::univariate(values)?, true_regimes, true_boundaries, seed })
    }
}

/// Per-regime AR coefficients and driving-noise variances.
#[derive(Debug, Clone, PartialEq)]
pub struct SarmParams {
    pub coeffs: Vec<Vec<f64>>,
    pub noise_var: Vec<f64>,
}

impl SarmParams {
    /// Three third-order regimes with unit noise.
    pub fn reference_defaults() -> Self {
        Self {
            coeffs: vec![vec![1.8, -0.99, 0.0], vec![1.65, -0.9, 0.1], vec![1.8, -0.85, 0.0]],
            noise_var: vec![1.0; 3],
        }
    }

    pub fn n_regimes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn order(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }
}

/// Durations uniform on `30..=50` for every regime.
pub fn reference_duration_law(n_regimes: usize) -> DurationLaw {
    DurationLaw::shared(DurationSpec::uniform(30, 50).expect("valid support"), n_regimes)
}

pub const REFERENCE_SWITCHES: usize = 100;

/// Draws `n_switches + 1` segments; each new regime is uniform over the others.
///
/// The first `k` samples are i.i.d. `N(0, 1)` and belong to the first segment.
pub fn gen_sarm_switching(params: &SarmParams, law: &DurationLaw, n_switches: usize, seed: u64) -> Result<LabeledSeries> {
    let s_n = params.n_regimes();
    let k = params.order();
    if s_n == 0 || params.noise_var.len() != s_n || params.coeffs.iter().any(|c| c.len() != k) {
        return Err(Error::Shape("SARM parameters disagree on S or k".into()));
    }
    if law.n_regimes() != s_n {
        return Err(Error::Shape("duration law and SARM parameters disagree on S".into()));
    }
    if params.noise_var.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidModel("noise variance must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut segs = Vec::with_capacity(n_switches + 1);
    let mut s = rng.random_range(0..s_n);
    for i in 0..=n_switches {
        if i > 0 && s_n > 1 {
            let j = rng.random_range(0..s_n - 1);
            s = if j >= s { j + 1 } else { j };
        }
        segs.push((s, draw_duration(law.spec(s), &mut rng)));
    }
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut v: Vec<f64> = Vec::with_capacity(segs.iter().map(|x| x.1).sum());
    for &(s, d) in &segs {
        for _ in 0..d {
            let t = v.len();
            let x = if t < k {
                unit.sample(&mut rng)
            } else {
                let mean: f64 = (1..=k).map(|i| params.coeffs[s][i - 1] * v[t - i]).sum();
                mean + params.noise_var[s].sqrt() * unit.sample(&mut rng)
            };
            if !x.is_finite() {
                return Err(Error::NonFiniteSample { t: t + 1 });
            }
            v.push(x);
        }
    }
    LabeledSeries::from_segments(v, &segs, seed)
}

fn draw_duration<R: Rng + ?Sized>(spec: &DurationSpec, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for d in spec.d_min()..=spec.d_max() {
        acc += spec.rho(d);
        if u < acc {
            return d;
        }
    }
    spec.d_max()
}

/// Two sinusoid segments with different frequencies plus Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidParams {
    pub segment_len: usize,
    /// Periods in steps of the two segments.
    pub periods: [f64; 2],
    pub amplitude: f64,
    pub noise_sd: f64,
}

impl Default for SinusoidParams {
    fn default() -> Self {
        Self { segment_len: 100, periods: [25.0, 8.0], amplitude: 1.0, noise_sd: 0.05 }
    }
}

pub fn gen_switching_sinusoid(seed: u64) -> Result<LabeledSeries> {
    gen_switching_sinusoid_with(&SinusoidParams::default(), seed)
}

/// Phase is continuous across the switch.
pub fn gen_switching_sinusoid_with(p: &SinusoidParams, seed: u64) -> Result<LabeledSeries> {
    if p.segment_len == 0 || p.periods.iter().any(|x| !(*x > 0.0)) || !(p.noise_sd >= 0.0) {
        return Err(Error::InvalidInput("sinusoid needs positive length and periods and noise_sd >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut phase = 0.0_f64;
    let mut v = Vec::with_capacity(2 * p.segment_len);
    for period in p.periods {
        let step = std::f64::consts::TAU / period;
        for _ in 0..p.segment_len {
            v.push(p.amplitude * phase.sin() + p.noise_sd * unit.sample(&mut rng));
            phase += step;
        }
    }
    LabeledSeries::from_segments(v, &[(0, p.segment_len), (1, p.segment_len)], seed)
}

/// Fraction of positions where the labels differ.
pub fn segmentation_error(estimated: &[usize], truth: &[usize]) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(Error::Shape(format!("{} estimated labels for {} true labels", estimated.len(), truth.len())));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let wrong = estimated.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Smallest error over relabelings of the estimate; for fitted models whose regime order is arbitrary.
pub fn segmentation_error_best_permutation(estimated: &[usize], truth: &[usize]) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(Error::Shape(format!("{} estimated labels for {} true labels", estimated.len(), truth.len())));
    }
    let n = estimated.iter().chain(truth).max().map_or(0, |m| m + 1);
    if n > 8 {
        return Err(Error::InvalidInput("best-permutation error supports at most 8 labels".into()));
    }
    let mut best = f64::INFINITY;
    for perm in (0..n).permutations(n) {
        let relabeled: Vec<usize> = estimated.iter().map(|&s| perm[s]).collect();
        best = best.min(segmentation_error(&relabeled, truth)?);
    }
    Ok(if best.is_finite() { best } else { 0.0 })
}
