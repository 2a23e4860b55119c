//! Parameter containers shared by every inference module.

pub mod duration;
pub mod emission;
pub mod io;
pub mod series;
pub mod transition;

use serde::{Deserialize, Serialize};

pub use duration::{
    geometric_duration_pmf, hazard_to_pmf, pmf_to_hazard, DurationLaw, DurationSpec,
};
pub use emission::{
    ArEmission, ArStart, Emission, GaussianDensity, GmmEmission, LinearGaussianEmission,
    LinearGaussianRegime,
};
pub use io::{validate_model, ModelDoc, ValidationReport};
pub use series::TimeSeries;
pub use transition::TransitionModel;

use crate::error::{Error, Result};

/// How the first regime relates to `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// The first regime may have started before the first observation.
    #[default]
    Relaxed,
    /// The first regime starts exactly at `t = 1`.
    Strict,
}

/// How the last segment of a segmental model relates to `t = T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentEnd {
    /// The last segment may continue past the observation window.
    #[default]
    Truncated,
    /// A segment must end exactly at `T`.
    Complete,
}

/// Structure of the discrete chain in a switching state-space model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlgssmVariant {
    /// Regime chain only; hidden dynamics continue across switches.
    #[default]
    Plain,
    /// Decreasing counts; dynamics continue across switches.
    Dc,
    /// Decreasing counts; hidden state redrawn from the reset law after a count expires.
    DcReset,
    /// Increasing counts; hidden state redrawn at every regime start.
    IcReset,
    /// Two-valued count: a regime change resets the hidden state.
    #[serde(rename = "changepoint")]
    ChangePoint,
}

/// Exact Gaussian-mixture propagation or single-Gaussian collapse per configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    #[default]
    Collapsed,
    Exact,
}

pub const DEFAULT_MIXTURE_CAP: usize = 4096;

/// Regime chain with per-step emissions (HMM, GMM-HMM, SARM).
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    pub transition: TransitionModel,
    pub emission: Emission,
}

impl HmmModel {
    pub fn new(transition: TransitionModel, emission: Emission) -> Result<Self> {
        check_regimes(transition.n_regimes(), emission.n_regimes())?;
        if matches!(emission, Emission::LinearGaussian(_)) {
            return Err(Error::InvalidModel("HMM emission must be GMM or AR".into()));
        }
        Ok(Self { transition, emission })
    }
}

/// Explicit-duration model with one chain of count variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationModel {
    pub transition: TransitionModel,
    pub durations: DurationLaw,
    pub emission: Emission,
    pub boundary: Boundary,
    /// Truncate the AR context at regime starts (increasing-count form only).
    pub cut: bool,
}

impl DurationModel {
    pub fn new(
        transition: TransitionModel,
        durations: DurationLaw,
        emission: Emission,
        boundary: Boundary,
        cut: bool,
    ) -> Result<Self> {
        check_regimes(transition.n_regimes(), emission.n_regimes())?;
        check_regimes(transition.n_regimes(), durations.n_regimes())?;
        if matches!(emission, Emission::LinearGaussian(_)) {
            return Err(Error::InvalidModel("duration model emission must be GMM or AR".into()));
        }
        Ok(Self { transition, durations, emission, boundary, cut })
    }
}

/// Two-set duration model with segment-level likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentalModel {
    pub transition: TransitionModel,
    pub durations: DurationLaw,
    pub emission: Emission,
    pub boundary: Boundary,
    pub end: SegmentEnd,
}

impl SegmentalModel {
    pub fn new(
        transition: TransitionModel,
        durations: DurationLaw,
        emission: Emission,
        boundary: Boundary,
        end: SegmentEnd,
    ) -> Result<Self> {
        check_regimes(transition.n_regimes(), emission.n_regimes())?;
        check_regimes(transition.n_regimes(), durations.n_regimes())?;
        if matches!(emission, Emission::LinearGaussian(_)) {
            return Err(Error::InvalidModel("segmental emission must be GMM or AR".into()));
        }
        Ok(Self { transition, durations, emission, boundary, end })
    }
}

/// Switching linear Gaussian state-space model.
#[derive(Debug, Clone, PartialEq)]
pub struct SlgssmModel {
    pub transition: TransitionModel,
    pub emission: LinearGaussianEmission,
    pub durations: Option<DurationLaw>,
    pub variant: SlgssmVariant,
    pub mode: FilterMode,
    pub mixture_cap: usize,
}

impl SlgssmModel {
    pub fn new(
        transition: TransitionModel,
        emission: LinearGaussianEmission,
        durations: Option<DurationLaw>,
        variant: SlgssmVariant,
    ) -> Result<Self> {
        check_regimes(transition.n_regimes(), emission.n_regimes())?;
        let needs = matches!(variant, SlgssmVariant::Dc | SlgssmVariant::DcReset | SlgssmVariant::IcReset);
        match (&durations, needs) {
            (None, true) => {
                return Err(Error::InvalidModel(format!("variant {variant:?} needs a duration law")))
            }
            (Some(d), _) => check_regimes(transition.n_regimes(), d.n_regimes())?,
            _ => {}
        }
        Ok(Self {
            transition,
            emission,
            durations,
            variant,
            mode: FilterMode::Collapsed,
            mixture_cap: DEFAULT_MIXTURE_CAP,
        })
    }

    pub fn with_mode(mut self, mode: FilterMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Any model loadable from a model file.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    HmmGmm(HmmModel),
    Sarm(HmmModel),
    DurationDc(DurationModel),
    DurationIc(DurationModel),
    Segmental(SegmentalModel),
    Slgssm(SlgssmModel),
}

impl Model {
    pub fn type_name(&self) -> &'static str {
        match self {
            Model::HmmGmm(_) => "hmm_gmm",
            Model::Sarm(_) => "sarm",
            Model::DurationDc(_) => "duration_dc",
            Model::DurationIc(_) => "duration_ic",
            Model::Segmental(_) => "segmental",
            Model::Slgssm(_) => "slgssm",
        }
    }

    pub fn n_regimes(&self) -> usize {
        match self {
            Model::HmmGmm(m) | Model::Sarm(m) => m.transition.n_regimes(),
            Model::DurationDc(m) | Model::DurationIc(m) => m.transition.n_regimes(),
            Model::Segmental(m) => m.transition.n_regimes(),
            Model::Slgssm(m) => m.transition.n_regimes(),
        }
    }
}

fn check_regimes(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape(format!("transition has {expected} regimes, component has {got}")));
    }
    Ok(())
}
