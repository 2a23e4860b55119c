//! Most likely segmentation and posterior sampling of segmentations.

use ndarray::{Array2, Array3};
use rand::Rng;

use super::{check_provider, segment_lik, SegmentLikelihood, SegmentPrior, SegmentTables};
use crate::discrete::hmm::draw;
use crate::error::{Error, Result};
use crate::model::{SegmentEnd, SegmentalModel};

/// Per-step `(s_t, d_t, c_t)` with `c_t` counting down to 1 at the segment end.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPath {
    pub regimes: Vec<usize>,
    pub durations: Vec<usize>,
    pub counts: Vec<usize>,
    pub log_joint: f64,
}

impl SegmentPath {
    /// Segments as `(end, regime, duration)` with 1-based end times, in time order.
    pub fn segments(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        let mut t = 0;
        while t < self.regimes.len() {
            let e = t + self.counts[t];
            out.push((e, self.regimes[t], self.durations[t]));
            t = e;
        }
        out
    }

    fn from_segments(n: usize, segs: &[(usize, usize, usize)], log_joint: f64) -> Self {
        let mut regimes = vec![0; n];
        let mut durations = vec![0; n];
        let mut counts = vec![0; n];
        for &(e, s, d) in segs {
            for t in (e + 1).saturating_sub(d).max(1)..=e.min(n) {
                regimes[t - 1] = s;
                durations[t - 1] = d;
                counts[t - 1] = e - t + 1;
            }
        }
        Self { regimes, durations, counts, log_joint }
    }
}

fn last_end(pr: &SegmentPrior) -> usize {
    match pr.end {
        SegmentEnd::Complete => pr.n,
        SegmentEnd::Truncated => pr.n_ends(),
    }
}

/// Max-product over segmentations.
///
/// Ties go to the earliest segment boundary, then the lowest regime index, then the earliest end.
pub fn seg_viterbi<P: SegmentLikelihood + ?Sized>(model: &SegmentalModel, provider: &P) -> Result<SegmentPath> {
    check_provider(model, provider)?;
    let pr = SegmentPrior::new(model, provider.len());
    let (n, s, dm, ne) = (pr.n, pr.s, pr.dm, pr.n_ends());
    let tr = &model.transition;
    let mut delta = Array3::from_elem((ne, s, dm), f64::NEG_INFINITY);
    let mut best_hat = Array2::from_elem((ne, s), f64::NEG_INFINITY);
    let mut hat_arg = Array2::zeros((ne, s));
    let mut best_tilde = Array2::from_elem((ne, s), f64::NEG_INFINITY);
    let mut tilde_arg = Array2::zeros((ne, s));
    for e in 1..=ne {
        for r in 0..s {
            for d in 1..=dm {
                let Some((a, b)) = pr.observed(e, d) else { continue };
                let prior = if e > d {
                    pr.log_rho[r][d - 1] + best_tilde[[e - d - 1, r]]
                } else {
                    pr.log_initial(r, e, d)
                };
                if prior == f64::NEG_INFINITY {
                    continue;
                }
                let v = prior + segment_lik(provider, a, b, r)?;
                delta[[e - 1, r, d - 1]] = v;
                // Longer durations start earlier, so they win ties.
                if v >= best_hat[[e - 1, r]] {
                    best_hat[[e - 1, r]] = v;
                    hat_arg[[e - 1, r]] = d;
                }
            }
        }
        for r in 0..s {
            for i in 0..s {
                let v = tr.log_p(r, i) + best_hat[[e - 1, i]];
                if v > best_tilde[[e - 1, r]] {
                    best_tilde[[e - 1, r]] = v;
                    tilde_arg[[e - 1, r]] = i;
                }
            }
        }
    }
    let mut best: Option<(f64, (usize, usize, usize), (usize, usize, usize))> = None;
    for e in n..=last_end(&pr) {
        for r in 0..s {
            for d in 1..=dm {
                let v = delta[[e - 1, r, d - 1]];
                if v == f64::NEG_INFINITY {
                    continue;
                }
                let key = ((e + dm) - d, r, e);
                let better = match &best {
                    None => true,
                    Some((bv, bkey, _)) => v > *bv || (v == *bv && key < *bkey),
                };
                if better {
                    best = Some((v, key, (e, r, d)));
                }
            }
        }
    }
    let Some((log_joint, _, (mut e, mut r, mut d))) = best else {
        return Err(Error::NoValidPath("every segmentation has zero probability".into()));
    };
    let mut segs = vec![(e, r, d)];
    while e > d {
        let ep = e - d;
        let rp = tilde_arg[[ep - 1, r]];
        let dp = hat_arg[[ep - 1, rp]];
        (e, r, d) = (ep, rp, dp);
        segs.push((e, r, d));
    }
    segs.reverse();
    Ok(SegmentPath::from_segments(n, &segs, log_joint))
}

/// `log p(s_{1:T}, d_{1:T}, c_{1:T}, v_{1:T})`; `-inf` for paths inconsistent with the model.
pub fn seg_path_log_joint<P: SegmentLikelihood + ?Sized>(
    model: &SegmentalModel,
    provider: &P,
    path: &SegmentPath,
) -> Result<f64> {
    let pr = SegmentPrior::new(model, provider.len());
    let n = pr.n;
    if path.regimes.len() != n || path.counts.len() != n || path.durations.len() != n {
        return Err(Error::Shape("path length differs from the series".into()));
    }
    let segs = path.segments();
    let mut lj = 0.0;
    let mut prev: Option<(usize, usize)> = None;
    for &(e, r, d) in &segs {
        if d == 0 || d > pr.dm || r >= pr.s {
            return Ok(f64::NEG_INFINITY);
        }
        let Some((a, b)) = pr.observed(e, d) else { return Ok(f64::NEG_INFINITY) };
        for t in a..b {
            if path.regimes[t] != r || path.durations[t] != d || path.counts[t] != e - t {
                return Ok(f64::NEG_INFINITY);
            }
        }
        lj += match prev {
            None => pr.log_initial(r, e, d),
            Some((pe, ps)) => {
                if e < d || e - d != pe {
                    return Ok(f64::NEG_INFINITY);
                }
                model.transition.log_p(r, ps) + pr.log_rho[r][d - 1]
            }
        };
        lj += segment_lik(provider, a, b, r)?;
        prev = Some((e, r));
    }
    Ok(lj)
}

/// Draws a segmentation from `p(σ_{1:T} | v_{1:T})` by sampling segments backwards from the end.
pub fn seg_sample_path<R: Rng + ?Sized>(
    model: &SegmentalModel,
    tables: &SegmentTables,
    rng: &mut R,
) -> Result<SegmentPath> {
    let (ne, s, dm) = tables.log_alpha_sd1.dim();
    let n = tables.n_obs;
    if s != model.transition.n_regimes() || ne + 1 != n + dm {
        return Err(Error::Shape("segment tables do not match the model".into()));
    }
    let last = match tables.end {
        SegmentEnd::Complete => n,
        SegmentEnd::Truncated => ne,
    };
    let z = tables.log_likelihood;
    let cells: Vec<(usize, usize, usize)> = (n..=last)
        .flat_map(|e| (0..s).flat_map(move |r| (1..=dm).map(move |d| (e, r, d))))
        .collect();
    let k = draw(cells.iter().map(|&(e, r, d)| (tables.log_alpha_sd1[[e - 1, r, d - 1]] - z).exp()), rng);
    let (mut e, mut r, mut d) = cells[k];
    let mut log_joint = tables.log_alpha_sd1[[e - 1, r, d - 1]];
    let mut segs = vec![(e, r, d)];
    while e > d {
        let ep = e - d;
        let norm = tables.log_alpha_tilde[[ep - 1, r]];
        let rp = draw(
            (0..s).map(|i| (model.transition.log_p(r, i) + tables.log_alpha_hat[[ep - 1, i]] - norm).exp()),
            rng,
        );
        let hn = tables.log_alpha_hat[[ep - 1, rp]];
        let dp = 1 + draw((0..dm).map(|j| (tables.log_alpha_sd1[[ep - 1, rp, j]] - hn).exp()), rng);
        log_joint += model.transition.log_p(r, rp) - norm;
        (e, r, d) = (ep, rp, dp);
        log_joint += tables.log_alpha_sd1[[e - 1, r, d - 1]];
        segs.push((e, r, d));
    }
    segs.reverse();
    Ok(SegmentPath::from_segments(n, &segs, log_joint))
}
