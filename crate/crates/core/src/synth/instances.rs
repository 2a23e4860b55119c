//! Random small models and series for cross-checks and benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::model::{
    ArEmission, ArStart, Boundary, DurationLaw, DurationModel, DurationSpec, Emission, GmmEmission, HmmModel,
    LinearGaussianEmission, LinearGaussianRegime, SegmentEnd, SegmentalModel, SlgssmModel, SlgssmVariant,
    TimeSeries, TransitionModel,
};

fn simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Random column-stochastic chain; with `zero_diagonal` no regime follows itself.
pub fn random_transition<R: Rng + ?Sized>(rng: &mut R, s: usize, zero_diagonal: bool) -> TransitionModel {
    let mut rows = vec![vec![0.0; s]; s];
    for i in 0..s {
        let mut col = simplex(rng, s);
        if zero_diagonal && s > 1 {
            col[i] = 0.0;
            let z: f64 = col.iter().sum();
            col.iter_mut().for_each(|x| *x /= z);
        }
        for j in 0..s {
            rows[j][i] = col[j];
        }
    }
    TransitionModel::from_rows(simplex(rng, s), &rows).expect("valid random chain")
}

/// Independent pmfs on `d_min..=d_max` per regime.
pub fn random_law<R: Rng + ?Sized>(rng: &mut R, s: usize, d_min: usize, d_max: usize) -> DurationLaw {
    let specs = (0..s)
        .map(|_| DurationSpec::new(d_min, d_max, simplex(rng, d_max - d_min + 1)).expect("valid random pmf"))
        .collect();
    DurationLaw::per_regime(specs).expect("non-empty")
}

pub fn random_gmm<R: Rng + ?Sized>(rng: &mut R, s: usize, m: usize, chained: bool) -> GmmEmission {
    let weights = (0..s).map(|_| simplex(rng, m)).collect();
    let means = (0..s).map(|_| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let vars = (0..s).map(|_| (0..m).map(|_| rng.random_range(0.3..2.0)).collect()).collect();
    let g = GmmEmission::univariate(weights, means, vars).expect("valid random mixture");
    if !chained {
        return g;
    }
    let chain = (0..s)
        .map(|_| {
            let cols: Vec<Vec<f64>> = (0..m).map(|_| simplex(rng, m)).collect();
            (0..m).map(|to| (0..m).map(|from| cols[from][to]).collect()).collect()
        })
        .collect();
    g.with_chain(chain).expect("valid random chain")
}

pub fn random_ar<R: Rng + ?Sized>(rng: &mut R, s: usize, k: usize, start: ArStart) -> ArEmission {
    let coeffs = (0..s).map(|_| (0..k).map(|_| rng.random_range(-0.9..0.9)).collect()).collect();
    let noise = (0..s).map(|_| rng.random_range(0.3..2.0)).collect();
    ArEmission::new(coeffs, noise, start).expect("valid random AR")
}

/// Mixture emission when `k == 0`, autoregression of order `k` otherwise.
pub fn random_emission<R: Rng + ?Sized>(rng: &mut R, s: usize, k: usize, m: usize) -> Emission {
    if k == 0 {
        Emission::Gmm(random_gmm(rng, s, m, false))
    } else {
        let start = match rng.random_range(0..3) {
            0 => ArStart::Conditional,
            1 => ArStart::Truncated,
            _ => ArStart::Gaussian { mean: 0.0, var: 1.5 },
        };
        Emission::Ar(random_ar(rng, s, k, start))
    }
}

pub fn random_hmm<R: Rng + ?Sized>(rng: &mut R, s: usize, emission: Emission) -> HmmModel {
    HmmModel::new(random_transition(rng, s, false), emission).expect("consistent random HMM")
}

pub fn random_duration<R: Rng + ?Sized>(
    rng: &mut R,
    s: usize,
    d_max: usize,
    emission: Emission,
    boundary: Boundary,
    cut: bool,
) -> DurationModel {
    let d_min = rng.random_range(1..=d_max);
    let law = random_law(rng, s, d_min.min(2), d_max);
    DurationModel::new(random_transition(rng, s, false), law, emission, boundary, cut).expect("consistent")
}

pub fn random_segmental<R: Rng + ?Sized>(
    rng: &mut R,
    s: usize,
    d_max: usize,
    emission: Emission,
    boundary: Boundary,
    end: SegmentEnd,
) -> SegmentalModel {
    let law = random_law(rng, s, 1, d_max);
    SegmentalModel::new(random_transition(rng, s, false), law, emission, boundary, end).expect("consistent")
}

fn spd<R: Rng + ?Sized>(rng: &mut R, n: usize, floor: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
    &a * a.transpose() + DMatrix::identity(n, n) * floor
}

pub fn random_lg_regime<R: Rng + ?Sized>(rng: &mut R, h: usize, d: usize) -> LinearGaussianRegime {
    LinearGaussianRegime {
        transition: DMatrix::from_fn(h, h, |_, _| rng.random_range(-0.8..0.8)),
        observation: DMatrix::from_fn(d, h, |_, _| rng.random_range(-1.0..1.0)),
        process_cov: spd(rng, h, 0.2),
        obs_cov: spd(rng, d, 0.3),
        reset_mean: DVector::from_fn(h, |_, _| rng.random_range(-1.0..1.0)),
        reset_cov: spd(rng, h, 0.5),
    }
}

pub fn random_slgssm<R: Rng + ?Sized>(
    rng: &mut R,
    variant: SlgssmVariant,
    s: usize,
    h: usize,
    d: usize,
    d_max: usize,
) -> SlgssmModel {
    let regimes = (0..s).map(|_| random_lg_regime(rng, h, d)).collect();
    let law = match variant {
        SlgssmVariant::Plain | SlgssmVariant::ChangePoint => None,
        _ => Some(random_law(rng, s, 1, d_max)),
    };
    let em = LinearGaussianEmission::new(regimes).expect("consistent regimes");
    SlgssmModel::new(random_transition(rng, s, false), em, law, variant).expect("consistent")
}

/// Values uniform on `[-2, 2)`.
pub fn random_series<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> TimeSeries {
    let data = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    TimeSeries::new(data, n, d).expect("consistent shape")
}
