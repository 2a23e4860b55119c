//! Discrete configurations `σ_t` of each state-space variant and how the hidden state crosses
//! each transition.

use crate::error::{Error, Result};
use crate::math::ln;
use crate::model::{pmf_to_hazard, DurationLaw, SlgssmModel, SlgssmVariant, TransitionModel};

/// How `h_t` depends on `h_{t-1}` along a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// `h_t = A^{s_t} h_{t-1} + η`.
    Continue,
    /// `h_t ~ N(μ^{s_t}, Σ^{s_t})`.
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pred {
    pub from: usize,
    pub log_p: f64,
    pub link: Link,
}

/// Configurations `σ = (s, c)` flattened as `s * n_counts + (c - 1)`.
#[derive(Debug, Clone)]
pub struct ConfigSpace {
    pub n_regimes: usize,
    pub n_counts: usize,
    pub log_initial: Vec<f64>,
    /// Incoming transitions of each configuration, in ascending `from` order.
    pub preds: Vec<Vec<Pred>>,
    pub succs: Vec<Vec<(usize, f64, Link)>>,
}

impl ConfigSpace {
    pub fn len(&self) -> usize {
        self.n_regimes * self.n_counts
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn regime(&self, sigma: usize) -> usize {
        sigma / self.n_counts
    }

    #[inline]
    pub fn count(&self, sigma: usize) -> usize {
        sigma % self.n_counts + 1
    }

    #[inline]
    pub fn index(&self, s: usize, c: usize) -> usize {
        s * self.n_counts + c - 1
    }

    pub fn for_model(model: &SlgssmModel) -> Result<Self> {
        let tr = &model.transition;
        let law = model.durations.as_ref();
        let need = || {
            law.ok_or_else(|| Error::InvalidModel(format!("variant {:?} needs a duration law", model.variant)))
        };
        let preds = match model.variant {
            SlgssmVariant::Plain => Self::plain(tr),
            SlgssmVariant::Dc => Self::decreasing(tr, need()?, false),
            SlgssmVariant::DcReset => Self::decreasing(tr, need()?, true),
            SlgssmVariant::IcReset => Self::increasing(tr, need()?),
            SlgssmVariant::ChangePoint => Self::changepoint(tr),
        };
        Ok(preds)
    }

    fn build(n_regimes: usize, n_counts: usize, log_initial: Vec<f64>, preds: Vec<Vec<Pred>>) -> Self {
        let mut succs = vec![Vec::new(); preds.len()];
        for (to, ps) in preds.iter().enumerate() {
            for p in ps {
                succs[p.from].push((to, p.log_p, p.link));
            }
        }
        Self { n_regimes, n_counts, log_initial, preds, succs }
    }

    fn plain(tr: &TransitionModel) -> Self {
        let s = tr.n_regimes();
        let preds = (0..s)
            .map(|j| {
                (0..s)
                    .filter(|&i| tr.p(j, i) > 0.0)
                    .map(|i| Pred { from: i, log_p: tr.log_p(j, i), link: Link::Continue })
                    .collect()
            })
            .collect();
        Self::build(s, 1, tr.log_initial().to_vec(), preds)
    }

    fn decreasing(tr: &TransitionModel, law: &DurationLaw, reset: bool) -> Self {
        let (s, dm) = (tr.n_regimes(), law.d_max());
        let enter = if reset { Link::Reset } else { Link::Continue };
        let mut log_initial = vec![f64::NEG_INFINITY; s * dm];
        let mut preds = vec![Vec::new(); s * dm];
        for j in 0..s {
            for c in 1..=dm {
                let to = j * dm + c - 1;
                log_initial[to] = tr.log_initial()[j] + law.log_relaxed_start(j, c);
                let lr = law.spec(j).log_rho(c);
                let mut ps = Vec::new();
                for i in 0..s {
                    if tr.p(j, i) > 0.0 && lr > f64::NEG_INFINITY {
                        ps.push(Pred { from: i * dm, log_p: tr.log_p(j, i) + lr, link: enter });
                    }
                    if i == j && c < dm {
                        ps.push(Pred { from: j * dm + c, log_p: 0.0, link: Link::Continue });
                    }
                }
                ps.sort_by_key(|p| p.from);
                preds[to] = ps;
            }
        }
        Self::build(s, dm, log_initial, preds)
    }

    fn increasing(tr: &TransitionModel, law: &DurationLaw) -> Self {
        let (s, dm) = (tr.n_regimes(), law.d_max());
        let hazards: Vec<Vec<f64>> = law
            .specs()
            .iter()
            .map(|spec| {
                let mut h = pmf_to_hazard(spec);
                h.resize(dm, 0.0);
                h
            })
            .collect();
        let mut log_initial = vec![f64::NEG_INFINITY; s * dm];
        let mut preds = vec![Vec::new(); s * dm];
        for j in 0..s {
            for c in 1..=dm {
                let to = j * dm + c - 1;
                log_initial[to] = tr.log_initial()[j] + law.log_relaxed_start(j, c);
                if c == 1 {
                    for i in 0..s {
                        for cp in 1..=dm {
                            let end = 1.0 - hazards[i][cp - 1];
                            if end > 0.0 && tr.p(j, i) > 0.0 {
                                preds[to].push(Pred {
                                    from: i * dm + cp - 1,
                                    log_p: ln(end) + tr.log_p(j, i),
                                    link: Link::Reset,
                                });
                            }
                        }
                    }
                } else if hazards[j][c - 2] > 0.0 {
                    preds[to].push(Pred { from: j * dm + c - 2, log_p: ln(hazards[j][c - 2]), link: Link::Continue });
                }
            }
        }
        Self::build(s, dm, log_initial, preds)
    }

    /// `c = 1` marks a regime change at `t` (hidden state reset), `c = 2` a stay.
    fn changepoint(tr: &TransitionModel) -> Self {
        let s = tr.n_regimes();
        let mut log_initial = vec![f64::NEG_INFINITY; s * 2];
        let mut preds = vec![Vec::new(); s * 2];
        for j in 0..s {
            log_initial[j * 2] = tr.log_initial()[j];
            for i in 0..s {
                if tr.p(j, i) == 0.0 {
                    continue;
                }
                for cp in 0..2 {
                    let from = i * 2 + cp;
                    if i == j {
                        preds[j * 2 + 1].push(Pred { from, log_p: tr.log_p(j, i), link: Link::Continue });
                    } else {
                        preds[j * 2].push(Pred { from, log_p: tr.log_p(j, i), link: Link::Reset });
                    }
                }
            }
        }
        Self::build(s, 2, log_initial, preds)
    }
}
