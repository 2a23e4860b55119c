//! Wall-time scaling of the pruned and unpruned decreasing-count forward passes.

use std::time::Instant;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::duration::{dc_forward, dc_forward_naive};
use crate::error::Result;
use crate::math::linear_slope;
use crate::model::Boundary;
use crate::synth::instances::{random_law, random_transition};

#[derive(Debug, Clone, Serialize)]
pub struct BenchConfig {
    pub n_obs: usize,
    pub n_regimes: usize,
    pub d_max: Vec<usize>,
    /// Regime counts for the sweep at the smallest `d_max`.
    pub regime_sweep: Vec<usize>,
    /// Timings keep the fastest of this many runs.
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_obs: 2000,
            n_regimes: 4,
            d_max: vec![8, 16, 32, 64, 128],
            regime_sweep: vec![2, 4, 8, 16],
            reps: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n_regimes: usize,
    pub d_max: usize,
    pub reduced_secs: f64,
    pub naive_secs: f64,
    pub speedup: f64,
    /// Largest `|a - b| / max(1, |a|)` between the two α tables.
    pub max_rel_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub d_max_rows: Vec<BenchRow>,
    pub regime_rows: Vec<BenchRow>,
    /// Log-log slope of wall time against `d_max`.
    pub reduced_slope_d_max: f64,
    pub naive_slope_d_max: f64,
    /// Log-log slope of wall time against `S`.
    pub reduced_slope_regimes: f64,
    pub naive_slope_regimes: f64,
    pub max_rel_diff: f64,
}

fn fastest<F: FnMut() -> Result<Array3<f64>>>(reps: usize, mut f: F) -> Result<(f64, Array3<f64>)> {
    let mut best = f64::INFINITY;
    let mut out = None;
    for _ in 0..reps.max(1) {
        let t0 = Instant::now();
        let a = f()?;
        best = best.min(t0.elapsed().as_secs_f64());
        out = Some(a);
    }
    Ok((best, out.expect("at least one run")))
}

pub fn max_rel_diff(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| {
            if x == y {
                0.0
            } else if x.is_finite() && y.is_finite() {
                (x - y).abs() / x.abs().max(1.0)
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

fn row(cfg: &BenchConfig, s: usize, dm: usize) -> Result<BenchRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((s as u64) << 32 | dm as u64));
    let tr = random_transition(&mut rng, s, false);
    let law = random_law(&mut rng, s, 1, dm);
    let ll = Array2::from_shape_fn((cfg.n_obs, s), |_| rng.random_range(-3.0..0.0));
    let (reduced_secs, fast) = fastest(cfg.reps, || dc_forward(&tr, &law, Boundary::Relaxed, &ll))?;
    let (naive_secs, slow) = fastest(cfg.reps, || dc_forward_naive(&tr, &law, Boundary::Relaxed, &ll))?;
    Ok(BenchRow {
        n_regimes: s,
        d_max: dm,
        reduced_secs,
        naive_secs,
        speedup: naive_secs / reduced_secs,
        max_rel_diff: max_rel_diff(&fast, &slow),
    })
}

fn slopes(rows: &[BenchRow], x: impl Fn(&BenchRow) -> usize) -> (f64, f64) {
    if rows.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let xs: Vec<f64> = rows.iter().map(|r| (x(r) as f64).ln()).collect();
    let red: Vec<f64> = rows.iter().map(|r| r.reduced_secs.ln()).collect();
    let nai: Vec<f64> = rows.iter().map(|r| r.naive_secs.ln()).collect();
    (linear_slope(&xs, &red), linear_slope(&xs, &nai))
}

pub fn bench_dc_forward(cfg: &BenchConfig) -> Result<BenchReport> {
    let d_max_rows = cfg.d_max.iter().map(|&dm| row(cfg, cfg.n_regimes, dm)).collect::<Result<Vec<_>>>()?;
    let dm0 = cfg.d_max.iter().copied().min().unwrap_or(8);
    let regime_rows = cfg.regime_sweep.iter().map(|&s| row(cfg, s, dm0)).collect::<Result<Vec<_>>>()?;
    let (reduced_slope_d_max, naive_slope_d_max) = slopes(&d_max_rows, |r| r.d_max);
    let (reduced_slope_regimes, naive_slope_regimes) = slopes(&regime_rows, |r| r.n_regimes);
    let max_rel_diff = d_max_rows.iter().chain(&regime_rows).map(|r| r.max_rel_diff).fold(0.0, f64::max);
    Ok(BenchReport {
        config: cfg.clone(),
        d_max_rows,
        regime_rows,
        reduced_slope_d_max,
        naive_slope_d_max,
        reduced_slope_regimes,
        naive_slope_regimes,
        max_rel_diff,
    })
}
