//! Regime and count marginals from segment tables.

use ndarray::{Array2, Array3};

use super::{segment_lik, SegmentLikelihood, SegmentPrior, SegmentTables};
use crate::error::{Error, Result};
use crate::math::{log_add_exp, log_sum_exp};
use crate::model::SegmentalModel;

#[derive(Debug, Clone)]
pub struct SegmentPosteriors {
    /// `[t, s, c - 1]`: `p(s_t, c_t | v_{1:T})` with `c_t` the steps left in the segment.
    pub gamma_sc: Array3<f64>,
    /// `[t, s]`: `p(s_t | v_{1:T})`.
    pub gamma_s: Array2<f64>,
    /// Unnormalized log mass at each `t`; every entry equals the log-likelihood.
    pub log_normalizers: Vec<f64>,
}

/// `p(s_t, c_t | v)` by summing `α_{t+c-1}(s, d) β_{t+c-1}(s)` over `d ≥ c`.
pub fn seg_posteriors(tables: &SegmentTables) -> Result<SegmentPosteriors> {
    let (ne, s, dm) = tables.log_alpha_sd1.dim();
    let n = tables.n_obs;
    if tables.log_beta_s1.dim() != (ne, s) || tables.log_alpha_hat.dim() != (ne, s) || ne + 1 != n + dm {
        return Err(Error::Shape("segment tables disagree in shape".into()));
    }
    // suffix[e - 1, s, c - 1] = log Σ_{d ≥ c} α_e(s, d)
    let mut suffix = Array3::from_elem((ne, s, dm), f64::NEG_INFINITY);
    for e in 0..ne {
        for r in 0..s {
            let mut acc = f64::NEG_INFINITY;
            for c in (0..dm).rev() {
                acc = log_add_exp(acc, tables.log_alpha_sd1[[e, r, c]]);
                suffix[[e, r, c]] = acc;
            }
        }
    }
    let mut gamma_sc = Array3::zeros((n, s, dm));
    let mut gamma_s = Array2::zeros((n, s));
    let mut log_normalizers = Vec::with_capacity(n);
    let mut buf = vec![f64::NEG_INFINITY; s * dm];
    for t in 0..n {
        for r in 0..s {
            for c in 1..=dm {
                let e = t + c;
                buf[r * dm + c - 1] = suffix[[e - 1, r, c - 1]] + tables.log_beta_s1[[e - 1, r]];
            }
        }
        let z = log_sum_exp(&buf);
        if z == f64::NEG_INFINITY {
            return Err(Error::Numerical(format!("zero posterior mass at t={}", t + 1)));
        }
        log_normalizers.push(z);
        for r in 0..s {
            let mut tot = 0.0;
            for c in 0..dm {
                let g = (buf[r * dm + c] - z).exp();
                gamma_sc[[t, r, c]] = g;
                tot += g;
            }
            gamma_s[[t, r]] = tot;
        }
    }
    Ok(SegmentPosteriors { gamma_sc, gamma_s, log_normalizers })
}

/// `p(s_t | v)` for models that never repeat a regime across a boundary.
///
/// Runs the duration-marginal forward recursion, checks its normalizer against `tables`, and
/// counts the regime's segment starts up to `t` minus its segment ends before `t`.
pub fn seg_posterior_state_piizero<P: SegmentLikelihood + ?Sized>(
    model: &SegmentalModel,
    provider: &P,
    tables: &SegmentTables,
) -> Result<Array2<f64>> {
    let tr = &model.transition;
    if !tr.has_zero_diagonal() {
        return Err(Error::Contract("state posterior via segment starts requires π_ii = 0 for every i".into()));
    }
    let pr = SegmentPrior::new(model, provider.len());
    let (n, s, dm, ne) = (pr.n, pr.s, pr.dm, pr.n_ends());
    if tables.last_end() != ne || tables.n_regimes() != s {
        return Err(Error::Shape("segment tables do not match the model and provider".into()));
    }
    let mut hat = Array2::from_elem((ne, s), f64::NEG_INFINITY);
    let mut tilde = Array2::from_elem((ne, s), f64::NEG_INFINITY);
    let mut first = vec![f64::NEG_INFINITY; s];
    let mut buf = vec![0.0; s.max(dm)];
    for e in 1..=ne {
        for r in 0..s {
            let mut acc = f64::NEG_INFINITY;
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
                let x = prior + segment_lik(provider, a, b, r)?;
                acc = log_add_exp(acc, x);
                if e <= d {
                    first[r] = log_add_exp(first[r], x + tables.log_beta_s1[[e - 1, r]]);
                }
            }
            hat[[e - 1, r]] = acc;
        }
        for r in 0..s {
            for i in 0..s {
                buf[i] = tr.log_p(r, i) + hat[[e - 1, i]];
            }
            tilde[[e - 1, r]] = log_sum_exp(&buf[..s]);
        }
    }
    let last = match pr.end {
        crate::model::SegmentEnd::Complete => n,
        crate::model::SegmentEnd::Truncated => ne,
    };
    let cells: Vec<f64> = (n..=last).flat_map(|e| hat.row(e - 1).to_vec()).collect();
    let z = log_sum_exp(&cells);
    if (z - tables.log_likelihood).abs() > 1e-9 {
        return Err(Error::Numerical(format!(
            "duration-marginal normalizer {z} disagrees with {}",
            tables.log_likelihood
        )));
    }
    let mut gamma = Array2::zeros((n, s));
    for r in 0..s {
        let mut p = (first[r] - z).exp();
        for t in 0..n {
            if t > 0 {
                p += (tilde[[t - 1, r]] + tables.log_entry[[t, r]] - z).exp();
                p -= (hat[[t - 1, r]] + tables.log_beta_s1[[t - 1, r]] - z).exp();
            }
            gamma[[t, r]] = p;
        }
    }
    Ok(gamma)
}
