//! JSON model documents, validation reports and conversion to in-memory models.
//!
//! Every document carries a `"model_type"` discriminator. Matrices are row-major arrays of
//! arrays and durations are `{"d_min", "d_max", "pmf"}` objects. Unknown keys are rejected.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::duration::DurationLawDoc;
use super::emission::{ArEmission, ArStart, Emission, GmmEmission, LinearGaussianEmission, LinearGaussianRegime};
use super::transition::TransitionDoc;
use super::{
    Boundary, DurationModel, FilterMode, HmmModel, Model, SegmentEnd, SegmentalModel, SlgssmModel,
    SlgssmVariant, DEFAULT_MIXTURE_CAP,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmDoc {
    /// `weights[s][m] = p(m | s)`.
    pub weights: Vec<Vec<f64>>,
    /// `means[s][m]` is a D-vector.
    pub means: Vec<Vec<Vec<f64>>>,
    /// `covariances[s][m]` is a D×D matrix.
    pub covariances: Vec<Vec<Vec<Vec<f64>>>>,
    /// `mixture_transition[s][m_t][m_{t-1}]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture_transition: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ArStartDoc {
    #[default]
    Conditional,
    Truncated,
    Gaussian { mean: f64, var: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArDoc {
    /// `coefficients[s][i-1] = a^s_i`.
    pub coefficients: Vec<Vec<f64>>,
    pub noise_variance: Vec<f64>,
    #[serde(default)]
    pub start: ArStartDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionDoc {
    Gmm(GmmDoc),
    Ar(ArDoc),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmmGmmDoc {
    pub transition: TransitionDoc,
    pub emission: GmmDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SarmDoc {
    pub transition: TransitionDoc,
    pub emission: ArDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationModelDoc {
    pub transition: TransitionDoc,
    pub duration: DurationLawDoc,
    pub emission: EmissionDoc,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub cut: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentalDoc {
    pub transition: TransitionDoc,
    pub duration: DurationLawDoc,
    pub emission: EmissionDoc,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub end: SegmentEnd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearGaussianRegimeDoc {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub sigma_h: Vec<Vec<f64>>,
    pub sigma_v: Vec<Vec<f64>>,
    pub reset_mean: Vec<f64>,
    pub reset_cov: Vec<Vec<f64>>,
}

fn default_cap() -> usize {
    DEFAULT_MIXTURE_CAP
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlgssmDoc {
    pub transition: TransitionDoc,
    pub regimes: Vec<LinearGaussianRegimeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<DurationLawDoc>,
    #[serde(default)]
    pub variant: SlgssmVariant,
    #[serde(default)]
    pub mode: FilterMode,
    #[serde(default = "default_cap")]
    pub mixture_cap: usize,
}

/// A parsed but not yet validated model file.
#[derive(Debug, Clone)]
pub enum ModelDoc {
    HmmGmm(HmmGmmDoc),
    Sarm(SarmDoc),
    DurationDc(DurationModelDoc),
    DurationIc(DurationModelDoc),
    Segmental(SegmentalDoc),
    Slgssm(SlgssmDoc),
}

/// Pass/fail outcome of model validation with one message per violated invariant.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn record<T>(&mut self, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.failures.push(e.to_string());
                None
            }
        }
    }
}

/// Checks every invariant of a model document without stopping at the first failure.
pub fn validate_model(doc: &ModelDoc) -> ValidationReport {
    let mut report = ValidationReport::default();
    let _ = doc.build_parts(&mut report);
    report
}

impl ModelDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    pub fn from_value(mut value: Value) -> Result<Self> {
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::InvalidModel("model file must be a JSON object".into()))?;
        let tag = obj
            .remove("model_type")
            .and_then(|v| v.as_str().map(str::to_owned))
            .ok_or_else(|| Error::InvalidModel("missing string field \"model_type\"".into()))?;
        Ok(match tag.as_str() {
            "hmm_gmm" => ModelDoc::HmmGmm(serde_json::from_value(value)?),
            "sarm" => ModelDoc::Sarm(serde_json::from_value(value)?),
            "duration_dc" => ModelDoc::DurationDc(serde_json::from_value(value)?),
            "duration_ic" => ModelDoc::DurationIc(serde_json::from_value(value)?),
            "segmental" => ModelDoc::Segmental(serde_json::from_value(value)?),
            "slgssm" => ModelDoc::Slgssm(serde_json::from_value(value)?),
            other => return Err(Error::InvalidModel(format!("unknown model_type \"{other}\""))),
        })
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            ModelDoc::HmmGmm(_) => "hmm_gmm",
            ModelDoc::Sarm(_) => "sarm",
            ModelDoc::DurationDc(_) => "duration_dc",
            ModelDoc::DurationIc(_) => "duration_ic",
            ModelDoc::Segmental(_) => "segmental",
            ModelDoc::Slgssm(_) => "slgssm",
        }
    }

    pub fn to_value(&self) -> Value {
        let mut v = match self {
            ModelDoc::HmmGmm(d) => serde_json::to_value(d),
            ModelDoc::Sarm(d) => serde_json::to_value(d),
            ModelDoc::DurationDc(d) | ModelDoc::DurationIc(d) => serde_json::to_value(d),
            ModelDoc::Segmental(d) => serde_json::to_value(d),
            ModelDoc::Slgssm(d) => serde_json::to_value(d),
        }
        .expect("model documents serialize");
        v.as_object_mut()
            .expect("object")
            .insert("model_type".into(), Value::String(self.type_name().into()));
        v
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("model documents serialize")
    }

    /// Validates and converts; fails with every violated invariant listed.
    pub fn build(&self) -> Result<Model> {
        let mut report = ValidationReport::default();
        match self.build_parts(&mut report) {
            Some(m) if report.passed() => Ok(m),
            _ => Err(Error::InvalidModel(report.failures.join("; "))),
        }
    }

    fn build_parts(&self, report: &mut ValidationReport) -> Option<Model> {
        match self {
            ModelDoc::HmmGmm(d) => {
                let tr = report.record(d.transition.build());
                let em = report.record(build_gmm(&d.emission));
                let (tr, em) = (tr?, em?);
                report.record(HmmModel::new(tr, Emission::Gmm(em))).map(Model::HmmGmm)
            }
            ModelDoc::Sarm(d) => {
                let tr = report.record(d.transition.build());
                let em = report.record(build_ar(&d.emission));
                let (tr, em) = (tr?, em?);
                report.record(HmmModel::new(tr, Emission::Ar(em))).map(Model::Sarm)
            }
            ModelDoc::DurationDc(d) | ModelDoc::DurationIc(d) => {
                let is_ic = matches!(self, ModelDoc::DurationIc(_));
                if d.cut && !is_ic {
                    report.failures.push("cut is only defined for duration_ic models".into());
                }
                let tr = report.record(d.transition.build());
                let n = tr.as_ref().map_or(1, |t| t.n_regimes());
                let du = report.record(d.duration.build(n));
                let em = report.record(build_emission(&d.emission));
                let (tr, du, em) = (tr?, du?, em?);
                let m = report.record(DurationModel::new(tr, du, em, d.boundary, d.cut))?;
                Some(if is_ic { Model::DurationIc(m) } else { Model::DurationDc(m) })
            }
            ModelDoc::Segmental(d) => {
                let tr = report.record(d.transition.build());
                let n = tr.as_ref().map_or(1, |t| t.n_regimes());
                let du = report.record(d.duration.build(n));
                let em = report.record(build_emission(&d.emission));
                let (tr, du, em) = (tr?, du?, em?);
                report
                    .record(SegmentalModel::new(tr, du, em, d.boundary, d.end))
                    .map(Model::Segmental)
            }
            ModelDoc::Slgssm(d) => {
                let tr = report.record(d.transition.build());
                let n = tr.as_ref().map_or(1, |t| t.n_regimes());
                let du = match &d.duration {
                    Some(x) => Some(report.record(x.build(n))?),
                    None => None,
                };
                let regimes: Vec<Option<LinearGaussianRegime>> =
                    d.regimes.iter().map(|r| report.record(build_lg_regime(r))).collect();
                let tr = tr?;
                let regimes: Vec<LinearGaussianRegime> = regimes.into_iter().collect::<Option<_>>()?;
                let em = report.record(LinearGaussianEmission::new(regimes))?;
                let mut m = report.record(SlgssmModel::new(tr, em, du, d.variant))?;
                m.mode = d.mode;
                m.mixture_cap = d.mixture_cap;
                Some(Model::Slgssm(m))
            }
        }
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if nr == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Shape(format!("{what}: empty or ragged matrix")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn build_gmm(d: &GmmDoc) -> Result<GmmEmission> {
    let means = d
        .means
        .iter()
        .map(|r| r.iter().map(|m| DVector::from_vec(m.clone())).collect())
        .collect();
    let covs = d
        .covariances
        .iter()
        .map(|r| r.iter().map(|c| matrix(c, "mixture covariance")).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let g = GmmEmission::new(d.weights.clone(), means, covs)?;
    match &d.mixture_transition {
        Some(chain) => g.with_chain(chain.clone()),
        None => Ok(g),
    }
}

fn build_ar(d: &ArDoc) -> Result<ArEmission> {
    let start = match d.start {
        ArStartDoc::Conditional => ArStart::Conditional,
        ArStartDoc::Truncated => ArStart::Truncated,
        ArStartDoc::Gaussian { mean, var } => ArStart::Gaussian { mean, var },
    };
    ArEmission::new(d.coefficients.clone(), d.noise_variance.clone(), start)
}

fn build_emission(d: &EmissionDoc) -> Result<Emission> {
    Ok(match d {
        EmissionDoc::Gmm(g) => Emission::Gmm(build_gmm(g)?),
        EmissionDoc::Ar(a) => Emission::Ar(build_ar(a)?),
    })
}

fn build_lg_regime(d: &LinearGaussianRegimeDoc) -> Result<LinearGaussianRegime> {
    Ok(LinearGaussianRegime {
        transition: matrix(&d.a, "A")?,
        observation: matrix(&d.b, "B")?,
        process_cov: matrix(&d.sigma_h, "sigma_h")?,
        obs_cov: matrix(&d.sigma_v, "sigma_v")?,
        reset_mean: DVector::from_vec(d.reset_mean.clone()),
        reset_cov: matrix(&d.reset_cov, "reset_cov")?,
    })
}

impl From<&GmmEmission> for GmmDoc {
    fn from(g: &GmmEmission) -> Self {
        let (s, m) = (g.n_regimes(), g.n_components());
        Self {
            weights: g.weights().to_vec(),
            means: (0..s)
                .map(|r| (0..m).map(|c| g.component(r, c).mean().iter().copied().collect()).collect())
                .collect(),
            covariances: (0..s)
                .map(|r| (0..m).map(|c| rows_of(g.component(r, c).cov())).collect())
                .collect(),
            mixture_transition: g.chain().cloned(),
        }
    }
}

impl From<&ArEmission> for ArDoc {
    fn from(a: &ArEmission) -> Self {
        Self {
            coefficients: a.coeffs().to_vec(),
            noise_variance: a.noise_var().to_vec(),
            start: match a.start() {
                ArStart::Conditional => ArStartDoc::Conditional,
                ArStart::Truncated => ArStartDoc::Truncated,
                ArStart::Gaussian { mean, var } => ArStartDoc::Gaussian { mean, var },
            },
        }
    }
}

fn emission_doc(e: &Emission) -> EmissionDoc {
    match e {
        Emission::Gmm(g) => EmissionDoc::Gmm(g.into()),
        Emission::Ar(a) => EmissionDoc::Ar(a.into()),
        Emission::LinearGaussian(_) => unreachable!("rejected at construction"),
    }
}

impl From<&Model> for ModelDoc {
    fn from(m: &Model) -> Self {
        match m {
            Model::HmmGmm(h) => ModelDoc::HmmGmm(HmmGmmDoc {
                transition: (&h.transition).into(),
                emission: match &h.emission {
                    Emission::Gmm(g) => g.into(),
                    _ => unreachable!("hmm_gmm holds a GMM emission"),
                },
            }),
            Model::Sarm(h) => ModelDoc::Sarm(SarmDoc {
                transition: (&h.transition).into(),
                emission: match &h.emission {
                    Emission::Ar(a) => a.into(),
                    _ => unreachable!("sarm holds an AR emission"),
                },
            }),
            Model::DurationDc(d) | Model::DurationIc(d) => {
                let doc = DurationModelDoc {
                    transition: (&d.transition).into(),
                    duration: (&d.durations).into(),
                    emission: emission_doc(&d.emission),
                    boundary: d.boundary,
                    cut: d.cut,
                };
                if matches!(m, Model::DurationIc(_)) {
                    ModelDoc::DurationIc(doc)
                } else {
                    ModelDoc::DurationDc(doc)
                }
            }
            Model::Segmental(d) => ModelDoc::Segmental(SegmentalDoc {
                transition: (&d.transition).into(),
                duration: (&d.durations).into(),
                emission: emission_doc(&d.emission),
                boundary: d.boundary,
                end: d.end,
            }),
            Model::Slgssm(d) => ModelDoc::Slgssm(SlgssmDoc {
                transition: (&d.transition).into(),
                regimes: d
                    .emission
                    .regimes()
                    .iter()
                    .map(|r| LinearGaussianRegimeDoc {
                        a: rows_of(&r.transition),
                        b: rows_of(&r.observation),
                        sigma_h: rows_of(&r.process_cov),
                        sigma_v: rows_of(&r.obs_cov),
                        reset_mean: r.reset_mean.iter().copied().collect(),
                        reset_cov: rows_of(&r.reset_cov),
                    })
                    .collect(),
                duration: d.durations.as_ref().map(Into::into),
                variant: d.variant,
                mode: d.mode,
                mixture_cap: d.mixture_cap,
            }),
        }
    }
}
