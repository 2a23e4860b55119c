//! Explicit regime-duration laws and the pmf/hazard correspondence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::ln;
use crate::model::transition::{check_prob_vector, PROB_TOL};

/// Duration pmf supported on `d_min..=d_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationSpec {
    d_min: usize,
    d_max: usize,
    pmf: Vec<f64>,
    // Indexed by d in 0..=d_max; entry 0 unused.
    log_pmf: Vec<f64>,
    survival: Vec<f64>,
}

impl DurationSpec {
    /// `pmf[i]` is the probability of duration `d_min + i`.
    pub fn new(d_min: usize, d_max: usize, pmf: Vec<f64>) -> Result<Self> {
        if d_min < 1 || d_min > d_max {
            return Err(Error::InvalidModel(format!(
                "duration support {d_min}..={d_max} invalid (need 1 <= d_min <= d_max)"
            )));
        }
        if pmf.len() != d_max - d_min + 1 {
            return Err(Error::Shape(format!(
                "duration pmf has {} entries, support has {}",
                pmf.len(),
                d_max - d_min + 1
            )));
        }
        check_prob_vector(&pmf, "duration pmf")?;
        let total: f64 = pmf.iter().sum();
        let pmf: Vec<f64> = pmf.iter().map(|p| p / total).collect();
        let mut full = vec![0.0; d_max + 2];
        for (i, p) in pmf.iter().enumerate() {
            full[d_min + i] = *p;
        }
        let mut survival = vec![0.0; d_max + 2];
        for d in (1..=d_max).rev() {
            survival[d] = survival[d + 1] + full[d];
        }
        survival[0] = 1.0;
        let log_pmf = full[..=d_max].iter().map(|&p| ln(p)).collect();
        Ok(Self { d_min, d_max, pmf, log_pmf, survival })
    }

    pub fn uniform(d_min: usize, d_max: usize) -> Result<Self> {
        let n = d_max.saturating_sub(d_min) + 1;
        Self::new(d_min, d_max, vec![1.0 / n as f64; n])
    }

    /// Point mass at `d`.
    pub fn fixed(d: usize) -> Result<Self> {
        Self::new(d, d, vec![1.0])
    }

    /// Geometric law with self-transition `stay`, truncated at `d_max` and renormalised.
    pub fn truncated_geometric(stay: f64, d_max: usize) -> Result<Self> {
        let raw: Vec<f64> =
            (1..=d_max).map(|d| geometric_duration_pmf(stay, d)).collect::<Result<_>>()?;
        let total: f64 = raw.iter().sum();
        Self::new(1, d_max, raw.iter().map(|p| p / total).collect())
    }

    /// Inverse of [`pmf_to_hazard`]; `hazard[c-1]` is the continuation probability at count `c`.
    pub fn from_hazard(hazard: &[f64]) -> Result<Self> {
        let full = hazard_to_pmf(hazard)?;
        let d_min = full.iter().position(|&p| p > 0.0).ok_or_else(|| {
            Error::InvalidModel("hazard never terminates".into())
        })? + 1;
        Self::new(d_min, hazard.len(), full[d_min - 1..].to_vec())
    }

    pub fn d_min(&self) -> usize {
        self.d_min
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// `ρ_d`, zero outside the support.
    #[inline]
    pub fn rho(&self, d: usize) -> f64 {
        if d < self.d_min || d > self.d_max {
            0.0
        } else {
            self.pmf[d - self.d_min]
        }
    }

    #[inline]
    pub fn log_rho(&self, d: usize) -> f64 {
        if d == 0 || d > self.d_max {
            f64::NEG_INFINITY
        } else {
            self.log_pmf[d]
        }
    }

    /// `Σ_{i≥c} ρ_i`.
    #[inline]
    pub fn survival(&self, c: usize) -> f64 {
        if c > self.d_max {
            0.0
        } else {
            self.survival[c]
        }
    }

    pub fn mean(&self) -> f64 {
        (self.d_min..=self.d_max).map(|d| d as f64 * self.rho(d)).sum()
    }

    /// Hazard vector over counts `1..=d_max`; see [`pmf_to_hazard`].
    pub fn hazard(&self) -> Vec<f64> {
        pmf_to_hazard(self)
    }
}

/// `π_ii^{d-1}(1-π_ii)`: the duration law implied by a plain Markov chain.
pub fn geometric_duration_pmf(stay: f64, d: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&stay) {
        return Err(Error::InvalidInput(format!(
            "self-transition {stay} must lie in [0, 1) for a geometric duration"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidInput("duration must be at least 1".into()));
    }
    Ok(stay.powi(d as i32 - 1) * (1.0 - stay))
}

/// Continuation probabilities `λ_c` for `c = 1..=d_max`, with `1 - λ_c = ρ_c / Σ_{i≥c} ρ_i`.
///
/// Counts below `d_min` get `λ_c = 1`; counts whose survival is zero get `λ_c = 0`.
pub fn pmf_to_hazard(spec: &DurationSpec) -> Vec<f64> {
    (1..=spec.d_max)
        .map(|c| {
            let surv = spec.survival(c);
            if surv <= 0.0 {
                0.0
            } else {
                (1.0 - spec.rho(c) / surv).max(0.0)
            }
        })
        .collect()
}

/// `ρ_d = (1-λ_d) ∏_{i<d} λ_i` over `d = 1..=hazard.len()`.
pub fn hazard_to_pmf(hazard: &[f64]) -> Result<Vec<f64>> {
    if hazard.is_empty() {
        return Err(Error::InvalidModel("empty hazard".into()));
    }
    if hazard.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
        return Err(Error::InvalidModel("hazard entries must lie in [0, 1]".into()));
    }
    if hazard[hazard.len() - 1] != 0.0 {
        return Err(Error::InvalidModel("hazard at d_max must be 0".into()));
    }
    let mut alive = 1.0;
    let mut pmf = Vec::with_capacity(hazard.len());
    for &l in hazard {
        pmf.push((1.0 - l) * alive);
        alive *= l;
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!("hazard implies total mass {total}")));
    }
    Ok(pmf)
}

/// One duration law per regime; the shared form repeats a single spec.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationLaw {
    specs: Vec<DurationSpec>,
    shared: bool,
}

impl DurationLaw {
    pub fn shared(spec: DurationSpec, n_regimes: usize) -> Self {
        Self { specs: vec![spec; n_regimes], shared: true }
    }

    pub fn per_regime(specs: Vec<DurationSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidModel("no duration specs".into()));
        }
        Ok(Self { specs, shared: false })
    }

    pub fn is_shared(&self) -> bool {
        self.shared
    }

    pub fn n_regimes(&self) -> usize {
        self.specs.len()
    }

    #[inline]
    pub fn spec(&self, regime: usize) -> &DurationSpec {
        &self.specs[regime]
    }

    pub fn specs(&self) -> &[DurationSpec] {
        &self.specs
    }

    pub fn d_max(&self) -> usize {
        self.specs.iter().map(DurationSpec::d_max).max().unwrap_or(1)
    }

    pub fn d_min(&self) -> usize {
        self.specs.iter().map(DurationSpec::d_min).min().unwrap_or(1)
    }

    /// Log prior weight of a count `c` at `t = 1` when the first regime may have started earlier:
    /// `Σ_{i≥c} ρ_i / E[d]`.
    pub fn log_relaxed_start(&self, regime: usize, c: usize) -> f64 {
        let spec = &self.specs[regime];
        ln(spec.survival(c)) - spec.mean().ln()
    }
}

/// Serialized duration pmf.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DurationDoc {
    pub d_min: usize,
    pub d_max: usize,
    pub pmf: Vec<f64>,
}

impl DurationDoc {
    pub fn build(&self) -> Result<DurationSpec> {
        DurationSpec::new(self.d_min, self.d_max, self.pmf.clone())
    }
}

impl From<&DurationSpec> for DurationDoc {
    fn from(s: &DurationSpec) -> Self {
        Self { d_min: s.d_min, d_max: s.d_max, pmf: s.pmf.clone() }
    }
}

/// Either one pmf shared by all regimes or one per regime.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DurationLawDoc {
    Shared(DurationDoc),
    PerRegime(Vec<DurationDoc>),
}

impl DurationLawDoc {
    pub fn build(&self, n_regimes: usize) -> Result<DurationLaw> {
        match self {
            DurationLawDoc::Shared(d) => Ok(DurationLaw::shared(d.build()?, n_regimes)),
            DurationLawDoc::PerRegime(ds) => {
                if ds.len() != n_regimes {
                    return Err(Error::Shape(format!(
                        "{} duration laws for {n_regimes} regimes",
                        ds.len()
                    )));
                }
                DurationLaw::per_regime(ds.iter().map(DurationDoc::build).collect::<Result<_>>()?)
            }
        }
    }
}

impl From<&DurationLaw> for DurationLawDoc {
    fn from(l: &DurationLaw) -> Self {
        if l.shared {
            DurationLawDoc::Shared((&l.specs[0]).into())
        } else {
            DurationLawDoc::PerRegime(l.specs.iter().map(Into::into).collect())
        }
    }
}
