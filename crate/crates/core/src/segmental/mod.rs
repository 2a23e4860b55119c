//! Segment-level inference with separate duration and count variables.
//!
//! Tables are indexed by the end time `e` of a segment (1-based, row `e - 1`). With
//! [`SegmentEnd::Truncated`] the final segment may end at a virtual time `e ∈ (T, T + d_max - 1]`,
//! contributing only the observations up to `T`.

pub mod decode;
pub mod posterior;
pub mod provider;

use ndarray::{Array2, Array3};

pub use decode::{seg_path_log_joint, seg_sample_path, seg_viterbi, SegmentPath};
pub use posterior::{seg_posterior_state_piizero, seg_posteriors, SegmentPosteriors};
pub use provider::{emission_segments, ArSegments, CachedSegments, IidSegments, SegmentLikelihood};

use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::{Boundary, SegmentEnd, SegmentalModel, TimeSeries};

/// Forward and backward quantities of the segmental model.
#[derive(Debug, Clone)]
pub struct SegmentTables {
    /// `[e - 1, s, d - 1]`: `log p(segment of regime s and duration d ends at e, v_{1:min(e,T)})`.
    pub log_alpha_sd1: Array3<f64>,
    /// `[e - 1, s]`: log of the sum of `log_alpha_sd1` over durations.
    pub log_alpha_hat: Array2<f64>,
    /// `[e - 1, s]`: `log Σ_{s'} π_{s s'} α̂_e(s')`, the weight of a segment of `s` starting at `e + 1`.
    pub log_alpha_tilde: Array2<f64>,
    /// `[e - 1, s]`: `log p(v_{e+1:T} | a segment of s ends at e)`; zero for `e ≥ T`.
    pub log_beta_s1: Array2<f64>,
    /// `[e, s]` for `e < T`: `log Σ_k ρ_k p(v_{e+1:e+k} | s) β_{e+k}(s)`, a segment of `s` entered after `e`.
    pub log_entry: Array2<f64>,
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub boundary: Boundary,
    pub end: SegmentEnd,
}

impl SegmentTables {
    pub fn n_regimes(&self) -> usize {
        self.log_alpha_hat.ncols()
    }

    pub fn d_max(&self) -> usize {
        self.log_alpha_sd1.dim().2
    }

    /// Last end time (1-based) stored.
    pub fn last_end(&self) -> usize {
        self.log_alpha_hat.nrows()
    }
}

/// Log weights shared by the recursions.
pub(crate) struct SegmentPrior {
    pub n: usize,
    pub s: usize,
    pub dm: usize,
    /// `[s][d - 1]`
    pub log_rho: Vec<Vec<f64>>,
    /// `[s][d - 1]`: weight of a first segment that starts at `t = 1`.
    pub log_first: Vec<Vec<f64>>,
    /// `[s][d - 1]`: weight of a first segment that started before `t = 1` (relaxed only).
    pub log_early: Vec<Vec<f64>>,
    pub end: SegmentEnd,
}

impl SegmentPrior {
    pub fn new(model: &SegmentalModel, n: usize) -> Self {
        let s = model.transition.n_regimes();
        let dm = model.durations.d_max();
        let mut log_rho = vec![vec![f64::NEG_INFINITY; dm]; s];
        let mut log_first = log_rho.clone();
        let mut log_early = log_rho.clone();
        for r in 0..s {
            let spec = model.durations.spec(r);
            let pi = model.transition.log_initial()[r];
            let norm = match model.boundary {
                Boundary::Relaxed => spec.mean().ln(),
                Boundary::Strict => 0.0,
            };
            for d in 1..=dm {
                log_rho[r][d - 1] = spec.log_rho(d);
                log_first[r][d - 1] = pi + spec.log_rho(d) - norm;
                if model.boundary == Boundary::Relaxed {
                    log_early[r][d - 1] = log_first[r][d - 1];
                }
            }
        }
        Self { n, s, dm, log_rho, log_first, log_early, end: model.end }
    }

    pub fn n_ends(&self) -> usize {
        self.n + self.dm - 1
    }

    /// Observed half-open range `[a, b)` of a segment of duration `d` ending at `e`, or `None`
    /// when the segment covers no observation or the end mode forbids it.
    #[inline]
    pub fn observed(&self, e: usize, d: usize) -> Option<(usize, usize)> {
        if e + 1 > self.n + d || (self.end == SegmentEnd::Complete && e > self.n) {
            return None;
        }
        let a = (e + 1).saturating_sub(d).max(1) - 1;
        Some((a, e.min(self.n)))
    }

    /// Prior weight of a segment `(s, d)` ending at `e` that has no predecessor.
    #[inline]
    pub fn log_initial(&self, r: usize, e: usize, d: usize) -> f64 {
        match e.cmp(&d) {
            std::cmp::Ordering::Equal => self.log_first[r][d - 1],
            std::cmp::Ordering::Less => self.log_early[r][d - 1],
            std::cmp::Ordering::Greater => f64::NEG_INFINITY,
        }
    }
}

#[inline]
pub(crate) fn segment_lik<P: SegmentLikelihood + ?Sized>(
    p: &P,
    a: usize,
    b: usize,
    r: usize,
) -> Result<f64> {
    let x = p.log_segment(a, b, r);
    if x.is_nan() {
        return Err(Error::ProviderNan { start: a + 1, end: b, regime: r });
    }
    Ok(x)
}

fn check_provider<P: SegmentLikelihood + ?Sized>(model: &SegmentalModel, p: &P) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    if p.n_regimes() != model.transition.n_regimes() {
        return Err(Error::Shape("segment provider and model disagree on S".into()));
    }
    if model.boundary == Boundary::Strict && model.end == SegmentEnd::Complete {
        let n = p.len();
        let mut reach = vec![false; n + 1];
        reach[0] = true;
        for e in 1..=n {
            reach[e] = model.durations.specs().iter().any(|spec| {
                (spec.d_min()..=spec.d_max().min(e)).any(|d| spec.rho(d) > 0.0 && reach[e - d])
            });
        }
        if !reach[n] {
            return Err(Error::NoValidPath(format!(
                "no composition of T={n} into complete segments with the given durations"
            )));
        }
    }
    Ok(())
}

/// Forward pass using the precomputed `α̂` and `α̃`, followed by the backward pass.
pub fn seg_forward<P: SegmentLikelihood + ?Sized>(
    model: &SegmentalModel,
    provider: &P,
) -> Result<SegmentTables> {
    check_provider(model, provider)?;
    let pr = SegmentPrior::new(model, provider.len());
    let (s, dm, ne) = (pr.s, pr.dm, pr.n_ends());
    let mut alpha = Array3::from_elem((ne, s, dm), f64::NEG_INFINITY);
    let mut hat = Array2::from_elem((ne, s), f64::NEG_INFINITY);
    let mut tilde = Array2::from_elem((ne, s), f64::NEG_INFINITY);
    let mut buf = vec![0.0; s.max(dm)];
    for e in 1..=ne {
        for r in 0..s {
            for d in 1..=dm {
                let Some((a, b)) = pr.observed(e, d) else { continue };
                let prior = if e > d {
                    pr.log_rho[r][d - 1] + tilde[[e - d - 1, r]]
                } else {
                    pr.log_initial(r, e, d)
                };
                if prior == f64::NEG_INFINITY {
                    continue;
                }
                alpha[[e - 1, r, d - 1]] = prior + segment_lik(provider, a, b, r)?;
            }
            for d in 0..dm {
                buf[d] = alpha[[e - 1, r, d]];
            }
            hat[[e - 1, r]] = log_sum_exp(&buf[..dm]);
        }
        for r in 0..s {
            for i in 0..s {
                buf[i] = model.transition.log_p(r, i) + hat[[e - 1, i]];
            }
            tilde[[e - 1, r]] = log_sum_exp(&buf[..s]);
        }
    }
    let log_likelihood = final_normalizer(&pr, &hat);
    if log_likelihood == f64::NEG_INFINITY {
        return Err(Error::NoValidPath("every segmentation has zero probability".into()));
    }
    let (log_beta_s1, log_entry) = seg_backward(model, provider)?;
    Ok(SegmentTables {
        log_alpha_sd1: alpha,
        log_alpha_hat: hat,
        log_alpha_tilde: tilde,
        log_beta_s1,
        log_entry,
        log_likelihood,
        n_obs: pr.n,
        boundary: model.boundary,
        end: model.end,
    })
}

fn final_normalizer(pr: &SegmentPrior, hat: &Array2<f64>) -> f64 {
    let last = match pr.end {
        SegmentEnd::Complete => pr.n,
        SegmentEnd::Truncated => pr.n_ends(),
    };
    let cells: Vec<f64> = (pr.n..=last).flat_map(|e| hat.row(e - 1).to_vec()).collect();
    log_sum_exp(&cells)
}

/// Forward pass with the double sum over the predecessor's regime and duration written out.
pub fn seg_forward_naive<P: SegmentLikelihood + ?Sized>(
    model: &SegmentalModel,
    provider: &P,
) -> Result<Array3<f64>> {
    check_provider(model, provider)?;
    let pr = SegmentPrior::new(model, provider.len());
    let (s, dm, ne) = (pr.s, pr.dm, pr.n_ends());
    let mut alpha = Array3::from_elem((ne, s, dm), f64::NEG_INFINITY);
    for e in 1..=ne {
        for r in 0..s {
            for d in 1..=dm {
                let Some((a, b)) = pr.observed(e, d) else { continue };
                let prior = if e > d {
                    let mut terms = Vec::with_capacity(s * dm);
                    for i in 0..s {
                        for dp in 1..=dm {
                            terms.push(model.transition.log_p(r, i) + alpha[[e - d - 1, i, dp - 1]]);
                        }
                    }
                    pr.log_rho[r][d - 1] + log_sum_exp(&terms)
                } else {
                    pr.log_initial(r, e, d)
                };
                if prior == f64::NEG_INFINITY {
                    continue;
                }
                alpha[[e - 1, r, d - 1]] = prior + segment_lik(provider, a, b, r)?;
            }
        }
    }
    Ok(alpha)
}

/// Backward pass: returns `(β, entry)` with `β_e(s) = Σ_{s'} π_{s' s} entry_e(s')`.
pub fn seg_backward<P: SegmentLikelihood + ?Sized>(
    model: &SegmentalModel,
    provider: &P,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_provider(model, provider)?;
    let pr = SegmentPrior::new(model, provider.len());
    let (n, s, dm, ne) = (pr.n, pr.s, pr.dm, pr.n_ends());
    let mut beta = Array2::from_elem((ne, s), f64::NEG_INFINITY);
    for e in n..=ne {
        for r in 0..s {
            beta[[e - 1, r]] = if e == n || pr.end == SegmentEnd::Truncated { 0.0 } else { f64::NEG_INFINITY };
        }
    }
    let mut entry = Array2::from_elem((n, s), f64::NEG_INFINITY);
    let mut buf = vec![0.0; s.max(dm)];
    for e in (0..n).rev() {
        for r in 0..s {
            let mut m = 0;
            for k in 1..=dm {
                let lr = pr.log_rho[r][k - 1];
                let Some((a, b)) = pr.observed(e + k, k) else { continue };
                let bt = beta[[e + k - 1, r]];
                if lr == f64::NEG_INFINITY || bt == f64::NEG_INFINITY {
                    continue;
                }
                buf[m] = lr + segment_lik(provider, a, b, r)? + bt;
                m += 1;
            }
            entry[[e, r]] = log_sum_exp(&buf[..m]);
        }
        if e == 0 {
            break;
        }
        for i in 0..s {
            for j in 0..s {
                buf[j] = model.transition.log_p(j, i) + entry[[e, j]];
            }
            beta[[e - 1, i]] = log_sum_exp(&buf[..s]);
        }
    }
    Ok((beta, entry))
}

/// Smoothing for a model and series with the emission-derived provider; `cache` memoizes segments.
pub fn seg_smooth(
    model: &SegmentalModel,
    series: &TimeSeries,
    cache: bool,
) -> Result<(SegmentTables, SegmentPosteriors)> {
    let provider = emission_segments(&model.emission, series)?;
    let tables = if cache {
        seg_forward(model, &CachedSegments::new(provider.as_ref(), model.durations.d_max()))?
    } else {
        seg_forward(model, provider.as_ref())?
    };
    let post = seg_posteriors(&tables)?;
    Ok((tables, post))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DurationLaw, DurationSpec, Emission, GmmEmission, TransitionModel};
    use rand::{Rng, SeedableRng};

    pub(crate) fn random_model<R: Rng>(
        rng: &mut R,
        s: usize,
        dmin: usize,
        dmax: usize,
        boundary: Boundary,
        end: SegmentEnd,
    ) -> SegmentalModel {
        let mut rows = vec![vec![0.0; s]; s];
        for i in 0..s {
            let w: Vec<f64> = (0..s).map(|_| rng.random_range(0.05..1.0)).collect();
            let tot: f64 = w.iter().sum();
            for j in 0..s {
                rows[j][i] = w[j] / tot;
            }
        }
        let w0: Vec<f64> = (0..s).map(|_| rng.random_range(0.1..1.0)).collect();
        let t0: f64 = w0.iter().sum();
        let tr = TransitionModel::from_rows(w0.iter().map(|x| x / t0).collect(), &rows).unwrap();
        let w: Vec<f64> = (dmin..=dmax).map(|_| rng.random_range(0.05..1.0)).collect();
        let tot: f64 = w.iter().sum();
        let law = DurationLaw::shared(
            DurationSpec::new(dmin, dmax, w.iter().map(|x| x / tot).collect()).unwrap(),
            s,
        );
        let gmm = GmmEmission::univariate(
            vec![vec![1.0]; s],
            (0..s).map(|r| vec![r as f64]).collect(),
            vec![vec![1.0]; s],
        )
        .unwrap();
        SegmentalModel::new(tr, law, Emission::Gmm(gmm), boundary, end).unwrap()
    }

    #[test]
    fn single_segment_chain() {
        let tr = TransitionModel::from_rows(vec![1.0], &[vec![1.0]]).unwrap();
        let law = DurationLaw::shared(DurationSpec::fixed(4).unwrap(), 1);
        let gmm = GmmEmission::univariate(vec![vec![1.0]], vec![vec![0.0]], vec![vec![1.0]]).unwrap();
        let m = SegmentalModel::new(tr, law, Emission::Gmm(gmm), Boundary::Strict, SegmentEnd::Complete)
            .unwrap();
        let ll = Array2::from_shape_vec((4, 1), vec![-1.0, -2.0, -0.5, -0.25]).unwrap();
        let t = seg_forward(&m, &IidSegments::new(ll)).unwrap();
        assert!((t.log_alpha_sd1[[3, 0, 3]] - (-3.75)).abs() < 1e-12);
        assert!((t.log_likelihood - (-3.75)).abs() < 1e-12);
    }

    #[test]
    fn strict_start_forbids_early_segments() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = random_model(&mut rng, 2, 1, 3, Boundary::Strict, SegmentEnd::Truncated);
        let ll = Array2::from_shape_fn((6, 2), |_| rng.random_range(-2.0..0.0));
        let t = seg_forward(&m, &IidSegments::new(ll)).unwrap();
        for e in 1..=3 {
            for d in e + 1..=3 {
                assert!(t.log_alpha_sd1.slice(ndarray::s![e - 1, .., d - 1]).iter().all(|&x| x == f64::NEG_INFINITY));
            }
        }
    }

    #[test]
    fn precomputed_forward_matches_naive() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..24 {
            let b = if trial % 2 == 0 { Boundary::Relaxed } else { Boundary::Strict };
            let en = if trial % 4 < 2 { SegmentEnd::Truncated } else { SegmentEnd::Complete };
            let m = random_model(&mut rng, 1 + trial % 3, 1 + trial % 2, 2 + trial % 3, b, en);
            let ll = Array2::from_shape_fn((9, 1 + trial % 3), |_| rng.random_range(-2.0..0.0));
            let p = IidSegments::new(ll);
            let Ok(fast) = seg_forward(&m, &p) else { continue };
            let slow = seg_forward_naive(&m, &p).unwrap();
            for (x, y) in fast.log_alpha_sd1.iter().zip(slow.iter()) {
                assert!(x == y || (x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn strict_complete_rejects_impossible_length() {
        let tr = TransitionModel::from_rows(vec![1.0], &[vec![1.0]]).unwrap();
        let law = DurationLaw::shared(DurationSpec::fixed(2).unwrap(), 1);
        let gmm = GmmEmission::univariate(vec![vec![1.0]], vec![vec![0.0]], vec![vec![1.0]]).unwrap();
        let m = SegmentalModel::new(tr, law, Emission::Gmm(gmm), Boundary::Strict, SegmentEnd::Complete)
            .unwrap();
        let r = seg_forward(&m, &IidSegments::new(Array2::zeros((3, 1))));
        assert!(matches!(r, Err(Error::NoValidPath(_))));
    }
}
