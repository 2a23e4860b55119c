//! Increasing duration-count model: `c_t` counts the steps since the current regime started.
//!
//! `(s, c) → (s, c+1)` with probability `λ_c` and `(s', c') → (s, 1)` with `(1 - λ_{c'}) π_{s s'}`.
//! With `cut`, the AR context never reaches back past the regime start.

use ndarray::{Array2, Array3};

use super::{check_inputs, finish_tables, CountIndexedTables};
use crate::error::{Error, Result};
use crate::math::{ln, log_add_exp, log_sum_exp};
use crate::model::{Boundary, DurationLaw, TransitionModel};

/// Per-step emission, or a context table `[t, s, lags]` for regime-truncated AR context.
#[derive(Debug, Clone)]
pub enum CountEmission {
    PerStep(Array2<f64>),
    ByContext { table: Array3<f64>, order: usize },
}

impl CountEmission {
    pub fn len(&self) -> usize {
        match self {
            CountEmission::PerStep(t) => t.nrows(),
            CountEmission::ByContext { table, .. } => table.dim().0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_regimes(&self) -> usize {
        match self {
            CountEmission::PerStep(t) => t.ncols(),
            CountEmission::ByContext { table, .. } => table.dim().1,
        }
    }

    /// `log p(v_t | s_t, c_t, ·)` for 0-based `t` and count `c ≥ 1`.
    #[inline]
    pub fn at(&self, t: usize, s: usize, c: usize) -> f64 {
        match self {
            CountEmission::PerStep(tab) => tab[[t, s]],
            CountEmission::ByContext { table, order } => table[[t, s, (*order).min(c - 1).min(t)]],
        }
    }

    fn per_step_view(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.len(), self.n_regimes()), |(t, s)| self.at(t, s, 1))
    }
}

pub(crate) struct HazardTable {
    pub log_cont: Vec<Vec<f64>>,
    pub log_end: Vec<Vec<f64>>,
}

impl HazardTable {
    pub fn new(law: &DurationLaw) -> Self {
        let dm = law.d_max();
        let mut log_cont = Vec::with_capacity(law.n_regimes());
        let mut log_end = Vec::with_capacity(law.n_regimes());
        for spec in law.specs() {
            let mut h = spec.hazard();
            h.resize(dm, 0.0);
            log_cont.push(h.iter().map(|&l| ln(l)).collect());
            log_end.push(h.iter().map(|&l| ln(1.0 - l)).collect());
        }
        Self { log_cont, log_end }
    }
}

fn log_init(tr: &TransitionModel, law: &DurationLaw, boundary: Boundary, s: usize, c: usize) -> f64 {
    tr.log_initial()[s]
        + match boundary {
            Boundary::Relaxed => law.log_relaxed_start(s, c),
            Boundary::Strict => {
                if c == 1 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
}

pub fn ic_forward(
    tr: &TransitionModel,
    law: &DurationLaw,
    boundary: Boundary,
    em: &CountEmission,
) -> Result<Array3<f64>> {
    check_inputs(tr, law, boundary, &em.per_step_view())?;
    let (n, s) = (em.len(), em.n_regimes());
    let dm = law.d_max();
    let hz = HazardTable::new(law);
    let mut alpha = Array3::from_elem((n, s, dm), f64::NEG_INFINITY);
    for r in 0..s {
        for c in 1..=dm {
            let w = log_init(tr, law, boundary, r, c);
            if w > f64::NEG_INFINITY {
                alpha[[0, r, c - 1]] = w + em.at(0, r, c);
            }
        }
    }
    let mut ended = vec![0.0; s];
    let mut buf = vec![0.0; s.max(dm)];
    for t in 1..n {
        for (i, e) in ended.iter_mut().enumerate() {
            for c in 1..=dm {
                buf[c - 1] = hz.log_end[i][c - 1] + alpha[[t - 1, i, c - 1]];
            }
            *e = log_sum_exp(&buf[..dm]);
        }
        for j in 0..s {
            for i in 0..s {
                buf[i] = tr.log_p(j, i) + ended[i];
            }
            let start = log_sum_exp(&buf[..s]);
            alpha[[t, j, 0]] = em.at(t, j, 1) + start;
            for c in 2..=dm {
                let prev = hz.log_cont[j][c - 2] + alpha[[t - 1, j, c - 2]];
                alpha[[t, j, c - 1]] = if prev == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    em.at(t, j, c) + prev
                };
            }
        }
        if alpha.slice(ndarray::s![t, .., ..]).iter().all(|&a| a == f64::NEG_INFINITY) {
            return Err(Error::ImpossibleData { t: t + 1 });
        }
    }
    Ok(alpha)
}

pub fn ic_backward(tr: &TransitionModel, law: &DurationLaw, em: &CountEmission) -> Array3<f64> {
    let (n, s) = (em.len(), em.n_regimes());
    let dm = law.d_max();
    let hz = HazardTable::new(law);
    let mut beta = Array3::zeros((n, s, dm));
    let mut start = vec![0.0; s];
    let mut buf = vec![0.0; s];
    for t in (0..n - 1).rev() {
        // start[s'] = p(v_{t+1} | s', c=1) β_{t+1}(s', 1)
        for (j, x) in start.iter_mut().enumerate() {
            *x = em.at(t + 1, j, 1) + beta[[t + 1, j, 0]];
        }
        for i in 0..s {
            for j in 0..s {
                buf[j] = tr.log_p(j, i) + start[j];
            }
            let switch = log_sum_exp(&buf);
            for c in 1..=dm {
                let end = hz.log_end[i][c - 1] + switch;
                let cont = if c < dm {
                    let l = hz.log_cont[i][c - 1];
                    if l == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        l + em.at(t + 1, i, c + 1) + beta[[t + 1, i, c]]
                    }
                } else {
                    f64::NEG_INFINITY
                };
                beta[[t, i, c - 1]] = log_add_exp(end, cont);
            }
        }
    }
    beta
}

pub fn ic_smooth_with(
    tr: &TransitionModel,
    law: &DurationLaw,
    boundary: Boundary,
    em: &CountEmission,
) -> Result<CountIndexedTables> {
    let log_alpha = ic_forward(tr, law, boundary, em)?;
    let log_beta = ic_backward(tr, law, em);
    Ok(finish_tables(log_alpha, log_beta))
}
